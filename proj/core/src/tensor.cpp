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

#include "bitdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace bitdet {
namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("Tensor shape must have at least one axis");
  }
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("Tensor dimension must be nonzero, got " +
                                  shape_to_string(shape));
    }
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(checked_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expect = checked_product(shape_);
  if (data_.size() != expect) {
    throw std::invalid_argument(
        "Tensor data size " + std::to_string(data_.size()) +
        " does not match shape " + shape_to_string(shape_));
  }
}

void Tensor::check_finite(const std::string& label) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw std::runtime_error(label + ": non-finite value at flat index " +
                               std::to_string(i));
    }
  }
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void ConvSpec::validate() const {
  if (c_in == 0 || c_out == 0) {
    throw std::invalid_argument("ConvSpec: channel counts must be nonzero");
  }
  if (kernel == 0) {
    throw std::invalid_argument("ConvSpec: kernel extent must be nonzero");
  }
  if (stride == 0) {
    throw std::invalid_argument("ConvSpec: stride must be nonzero");
  }
}

std::pair<std::size_t, std::size_t> ConvSpec::output_dims(
    std::size_t in_h, std::size_t in_w) const {
  validate();
  const std::size_t ph = in_h + 2 * padding;
  const std::size_t pw = in_w + 2 * padding;
  if (ph < kernel || pw < kernel) {
    throw std::invalid_argument(
        "ConvSpec: padded input " + std::to_string(ph) + "x" +
        std::to_string(pw) + " smaller than kernel " + std::to_string(kernel));
  }
  if ((ph - kernel) % stride != 0 || (pw - kernel) % stride != 0) {
    throw std::invalid_argument(
        "ConvSpec: stride " + std::to_string(stride) +
        " does not evenly tile padded input " + std::to_string(ph) + "x" +
        std::to_string(pw) + " with kernel " + std::to_string(kernel));
  }
  return {(ph - kernel) / stride + 1, (pw - kernel) / stride + 1};
}

Tensor conv2d_ref(const Tensor& input, const Tensor& weights,
                  const ConvSpec& spec) {
  spec.validate();
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d_ref: input must be rank 3, got " +
                                shape_to_string(input.shape()));
  }
  if (weights.rank() != 4) {
    throw std::invalid_argument("conv2d_ref: weights must be rank 4, got " +
                                shape_to_string(weights.shape()));
  }
  if (input.dim(0) != spec.c_in || weights.dim(0) != spec.c_out ||
      weights.dim(1) != spec.c_in || weights.dim(2) != spec.kernel ||
      weights.dim(3) != spec.kernel) {
    throw std::invalid_argument(
        "conv2d_ref: shapes " + shape_to_string(input.shape()) + " / " +
        shape_to_string(weights.shape()) + " do not match layer spec");
  }
  input.check_finite("conv2d_ref input");
  weights.check_finite("conv2d_ref weights");

  const std::size_t in_h = input.dim(1);
  const std::size_t in_w = input.dim(2);
  const auto [out_h, out_w] = spec.output_dims(in_h, in_w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(spec.padding);

  Tensor out({spec.c_out, out_h, out_w});
  for (std::size_t oc = 0; oc < spec.c_out; ++oc) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        for (std::size_t ic = 0; ic < spec.c_in; ++ic) {
          for (std::size_t ky = 0; ky < spec.kernel; ++ky) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * spec.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
            for (std::size_t kx = 0; kx < spec.kernel; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * spec.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
              acc += input.at(ic, static_cast<std::size_t>(iy),
                              static_cast<std::size_t>(ix)) *
                     weights.at(oc, ic, ky, kx);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

Tensor pad_spatial(const Tensor& input, std::size_t padding, double value) {
  if (input.rank() != 3) {
    throw std::invalid_argument("pad_spatial: input must be rank 3, got " +
                                shape_to_string(input.shape()));
  }
  if (padding == 0) return input;
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  Tensor out({c, h + 2 * padding, w + 2 * padding});
  std::fill(out.values().begin(), out.values().end(), value);
  for (std::size_t ic = 0; ic < c; ++ic) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = input.data() + (ic * h + y) * w;
      double* dst = &out.at(ic, y + padding, padding);
      std::copy(src, src + w, dst);
    }
  }
  return out;
}

std::vector<double> channel_reduce(const Tensor& t, ChannelStat stat) {
  t.check_finite("channel_reduce input");
  const std::size_t channels = t.dim(0);
  const std::size_t per = t.size() / channels;
  std::vector<double> out(channels, 0.0);
  const double* p = t.data();
  for (std::size_t c = 0; c < channels; ++c, p += per) {
    double mean = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      mean += (stat == ChannelStat::kMeanAbs) ? std::abs(p[i]) : p[i];
    }
    mean /= static_cast<double>(per);
    if (stat == ChannelStat::kVariance) {
      double var = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double d = p[i] - mean;
        var += d * d;
      }
      out[c] = var / static_cast<double>(per);
    } else {
      out[c] = mean;
    }
  }
  return out;
}

}  // namespace bitdet
