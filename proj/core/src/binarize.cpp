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

#include "bitdet/binarize.hpp"

#include <cmath>
#include <stdexcept>

namespace bitdet {

SignTensor::SignTensor(std::vector<std::size_t> shape,
                       std::vector<std::int8_t> signs)
    : shape_(std::move(shape)), signs_(std::move(signs)) {
  std::size_t n = 1;
  if (shape_.empty()) {
    throw std::invalid_argument("SignTensor shape must have at least one axis");
  }
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("SignTensor dimension is zero");
    n *= d;
  }
  if (signs_.size() != n) {
    throw std::invalid_argument("SignTensor data size does not match shape " +
                                shape_to_string(shape_));
  }
  for (std::int8_t s : signs_) {
    if (s != 1 && s != -1) {
      throw std::invalid_argument("SignTensor values must be -1 or +1");
    }
  }
}

Tensor SignTensor::to_tensor() const {
  std::vector<double> d(signs_.size());
  for (std::size_t i = 0; i < signs_.size(); ++i) {
    d[i] = static_cast<double>(signs_[i]);
  }
  return Tensor(shape_, std::move(d));
}

void ScaleVector::validate() const {
  if (alpha.empty()) {
    throw std::invalid_argument("ScaleVector must not be empty");
  }
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument(
          "ScaleVector entries must be positive finite values");
    }
  }
}

SignTensor sign_binarize(const Tensor& t) {
  std::vector<std::int8_t> s(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (std::isnan(v)) {
      throw std::invalid_argument(
          "sign_binarize: NaN at flat index " + std::to_string(i) +
          "; sign is undefined");
    }
    s[i] = (v > 0.0) ? 1 : -1;
  }
  return SignTensor(t.shape(), std::move(s));
}

ScaleVector optimal_scales(const Tensor& weights) {
  if (weights.rank() != 4) {
    throw std::invalid_argument("optimal_scales: weights must be rank 4, got " +
                                shape_to_string(weights.shape()));
  }
  weights.check_finite("optimal_scales weights");
  ScaleVector sv;
  sv.alpha = channel_reduce(weights, ChannelStat::kMeanAbs);
  for (std::size_t c = 0; c < sv.alpha.size(); ++c) {
    if (sv.alpha[c] == 0.0) {
      throw std::invalid_argument("optimal_scales: output channel " +
                                  std::to_string(c) +
                                  " is all zero; scale would vanish");
    }
  }
  sv.validate();
  return sv;
}

namespace {

double residual_sum(const Tensor& weights, const ScaleVector& scales) {
  if (weights.rank() != 4 || weights.dim(0) != scales.alpha.size()) {
    throw std::invalid_argument(
        "reconstruction residual: weights " + shape_to_string(weights.shape()) +
        " do not match " + std::to_string(scales.alpha.size()) + " scales");
  }
  scales.validate();
  const std::size_t per = weights.size() / weights.dim(0);
  const double* w = weights.data();
  double total = 0.0;
  for (std::size_t c = 0; c < weights.dim(0); ++c, w += per) {
    const double a = scales.alpha[c];
    for (std::size_t i = 0; i < per; ++i) {
      const double s = (w[i] > 0.0) ? 1.0 : -1.0;
      const double d = w[i] - a * s;
      total += d * d;
    }
  }
  return total;
}

}  // namespace

double reconstruction_loss(const Tensor& weights, const ScaleVector& scales) {
  return residual_sum(weights, scales);
}

double reconstruction_penalty(const Tensor& weights,
                              const ScaleVector& scales) {
  return residual_sum(weights, scales) / static_cast<double>(weights.size());
}

Tensor ste_backward(const Tensor& upstream_grad,
                    const Tensor& pre_binarization) {
  if (!upstream_grad.same_shape(pre_binarization)) {
    throw std::invalid_argument(
        "ste_backward: gradient shape " +
        shape_to_string(upstream_grad.shape()) + " does not match input " +
        shape_to_string(pre_binarization.shape()));
  }
  Tensor out(upstream_grad.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (std::abs(pre_binarization[i]) <= 1.0) ? upstream_grad[i] : 0.0;
  }
  return out;
}

}  // namespace bitdet
