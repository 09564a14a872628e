// Copyright 2026 The bitdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BITDET_BINARIZE_HPP_
#define BITDET_BINARIZE_HPP_

#include <cstdint>
#include <vector>

#include "bitdet/tensor.hpp"

namespace bitdet {

// Tensor of {-1, +1} values stored one byte each. The packed bitplane
// representation lives in bitpack.hpp; this form keeps full indexing.
class SignTensor {
 public:
  SignTensor() = default;

  // Throws std::invalid_argument if any element is not exactly -1 or +1.
  SignTensor(std::vector<std::size_t> shape, std::vector<std::int8_t> signs);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return signs_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::int8_t operator[](std::size_t i) const { return signs_[i]; }
  const std::vector<std::int8_t>& signs() const { return signs_; }

  // Widens to a double tensor of -1.0 / +1.0 values.
  Tensor to_tensor() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<std::int8_t> signs_;
};

// Per-output-channel positive scale factors.
struct ScaleVector {
  std::vector<double> alpha;

  // Throws std::invalid_argument if empty or any entry is not a positive
  // finite value.
  void validate() const;
};

// Elementwise sign with the convention sign(x) = +1 if x > 0, else -1
// (zero maps to -1). NaN input throws std::invalid_argument since its sign
// is undefined.
SignTensor sign_binarize(const Tensor& t);

// Closed-form scale that minimizes || w - alpha * sign(w) ||^2 per output
// channel of a rank-4 weight tensor: the mean absolute value of that
// channel's weights. Throws if a channel is entirely zero (its scale would
// be zero, which ScaleVector forbids).
ScaleVector optimal_scales(const Tensor& weights);

// Sum of squared residuals || w - alpha * sign(w) ||^2 over the whole
// weight tensor; alpha is applied per output channel.
double reconstruction_loss(const Tensor& weights, const ScaleVector& scales);

// reconstruction_loss divided by the element count; this mean-square form
// is the penalty term used by training so its weight is size-independent.
double reconstruction_penalty(const Tensor& weights,
                              const ScaleVector& scales);

// Straight-through gradient estimator for the sign function: passes
// upstream gradients where |pre_binarization| <= 1 and zeroes them
// elsewhere. Shapes must match.
Tensor ste_backward(const Tensor& upstream_grad,
                    const Tensor& pre_binarization);

}  // namespace bitdet

#endif  // BITDET_BINARIZE_HPP_
