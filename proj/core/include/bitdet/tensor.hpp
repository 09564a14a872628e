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

#ifndef BITDET_TENSOR_HPP_
#define BITDET_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace bitdet {

// Dense row-major tensor of doubles.
//
// Axis conventions used throughout the library:
//   rank 1: (C)             per-channel vectors
//   rank 3: (C, H, W)       activations, channel axis first
//   rank 4: (O, I, K, K)    convolution weights, output channel first
class Tensor {
 public:
  Tensor() = default;

  // Allocates a zero-filled tensor. Throws std::invalid_argument if the
  // shape is empty or any dimension is zero.
  explicit Tensor(std::vector<std::size_t> shape);

  // Wraps existing data; data.size() must equal the shape product.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Unchecked element access for the common ranks.
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double& at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return data_[((o * shape_[1] + i) * shape_[2] + y) * shape_[3] + x];
  }
  double at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return data_[((o * shape_[1] + i) * shape_[2] + y) * shape_[3] + x];
  }

  // Throws std::runtime_error naming `label` if any element is NaN or Inf.
  void check_finite(const std::string& label) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Formats a shape as e.g. "(3, 64, 64)" for error messages.
std::string shape_to_string(const std::vector<std::size_t>& shape);

// Geometry of a 2-D convolution layer. Square kernels, symmetric padding.
struct ConvSpec {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t kernel = 0;    // spatial extent K of the K x K kernel
  std::size_t stride = 1;
  std::size_t padding = 0;

  // Validates the fields; throws std::invalid_argument on nonsense
  // (zero channels, zero kernel, zero stride).
  void validate() const;

  // Output spatial dims for an input of (in_h, in_w). Requires the padded
  // extent to cover the kernel and the stride to divide the span exactly;
  // throws std::invalid_argument otherwise.
  std::pair<std::size_t, std::size_t> output_dims(std::size_t in_h,
                                                  std::size_t in_w) const;
};

// Reference 2-D cross-correlation in plain double arithmetic.
//
// input is (C_in, H, W), weights are (C_out, C_in, K, K); the result is
// (C_out, H_out, W_out). Padding pixels contribute zero. Accumulation order
// is fixed (input channel, then kernel row, then kernel column) so results
// are bit-reproducible. Inputs must be finite.
Tensor conv2d_ref(const Tensor& input, const Tensor& weights,
                  const ConvSpec& spec);

// Pads the spatial axes of a rank-3 (C, H, W) tensor symmetrically with
// `value`, returning (C, H + 2*padding, W + 2*padding). Binary layers pad
// with -1 (a valid sign); real layers pad with 0.
Tensor pad_spatial(const Tensor& input, std::size_t padding, double value);

// Per-channel reduction over all remaining axes (channel axis is axis 0).
enum class ChannelStat { kMean, kVariance, kMeanAbs };

// Returns one value per channel. Variance uses the population convention
// (divide by the element count, not count - 1).
std::vector<double> channel_reduce(const Tensor& t, ChannelStat stat);

}  // namespace bitdet

#endif  // BITDET_TENSOR_HPP_
