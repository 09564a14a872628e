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

#include "bitdet/bitpack.hpp"

#include <bit>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace bitdet {
namespace {

std::size_t pack_axis_for_rank(std::size_t rank) {
  return rank == 4 ? 1 : 0;
}

}  // namespace

BinaryTensor BinaryTensor::filled_minus_one(std::vector<std::size_t> shape) {
  BinaryTensor b;
  if (shape.empty()) {
    throw std::invalid_argument("BinaryTensor shape must have at least one axis");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("BinaryTensor dimension is zero");
    }
  }
  b.shape_ = std::move(shape);
  b.pack_axis_ = pack_axis_for_rank(b.shape_.size());
  b.row_bits_ = b.shape_[b.pack_axis_];
  b.words_per_row_ = (b.row_bits_ + 63) / 64;
  b.rows_ = 1;
  for (std::size_t a = 0; a < b.shape_.size(); ++a) {
    if (a != b.pack_axis_) b.rows_ *= b.shape_[a];
  }
  b.words_.assign(b.rows_ * b.words_per_row_, 0);
  return b;
}

BinaryTensor BinaryTensor::pack(const SignTensor& s) {
  BinaryTensor b = filled_minus_one(s.shape());
  const std::size_t rank = b.shape_.size();
  const std::size_t axis = b.pack_axis_;

  // Strides of the logical tensor and, separately, the row-major layout of
  // the remaining (non-packed) axes.
  std::vector<std::size_t> stride(rank, 1);
  for (std::size_t a = rank - 1; a > 0; --a) {
    stride[a - 1] = stride[a] * b.shape_[a];
  }
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < s.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t a = 0; a < rank; ++a) {
      idx[a] = rem / stride[a];
      rem %= stride[a];
    }
    std::size_t row = 0;
    for (std::size_t a = 0; a < rank; ++a) {
      if (a != axis) row = row * b.shape_[a] + idx[a];
    }
    const std::size_t bit = idx[axis];
    if (s[flat] > 0) {
      b.words_[row * b.words_per_row_ + bit / 64] |=
          std::uint64_t{1} << (bit % 64);
    }
  }
  return b;
}

SignTensor BinaryTensor::unpack() const {
  const std::size_t rank = shape_.size();
  std::size_t total = 1;
  for (std::size_t d : shape_) total *= d;

  std::vector<std::size_t> stride(rank, 1);
  for (std::size_t a = rank - 1; a > 0; --a) {
    stride[a - 1] = stride[a] * shape_[a];
  }
  std::vector<std::int8_t> out(total);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t a = 0; a < rank; ++a) {
      idx[a] = rem / stride[a];
      rem %= stride[a];
    }
    std::size_t row = 0;
    for (std::size_t a = 0; a < rank; ++a) {
      if (a != pack_axis_) row = row * shape_[a] + idx[a];
    }
    const std::size_t bit = idx[pack_axis_];
    const std::uint64_t word = words_[row * words_per_row_ + bit / 64];
    out[flat] = ((word >> (bit % 64)) & 1) ? 1 : -1;
  }
  return SignTensor(shape_, std::move(out));
}

std::uint64_t BinaryTensor::last_word_mask() const {
  const std::size_t rem = row_bits_ % 64;
  return rem == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << rem) - 1);
}

namespace {

// Agreement count between two packed rows of `words` words each; `mask`
// clears the padding bits of the final word.
inline std::int64_t row_agreements(const std::uint64_t* a,
                                   const std::uint64_t* w, std::size_t words,
                                   std::uint64_t mask) {
  std::int64_t agree = 0;
  for (std::size_t i = 0; i + 1 < words; ++i) {
    agree += std::popcount(~(a[i] ^ w[i]));
  }
  agree += std::popcount(~(a[words - 1] ^ w[words - 1]) & mask);
  return agree;
}

}  // namespace

BitConvResult xnor_popcount_conv_core(const BinaryTensor& activations,
                                      const BinaryTensor& weights,
                                      const ConvSpec& spec) {
  spec.validate();
  if (activations.logical_shape().size() != 3) {
    throw std::invalid_argument(
        "xnor conv: activations must be rank 3, got " +
        shape_to_string(activations.logical_shape()));
  }
  if (weights.logical_shape().size() != 4) {
    throw std::invalid_argument("xnor conv: weights must be rank 4, got " +
                                shape_to_string(weights.logical_shape()));
  }
  const auto& ashape = activations.logical_shape();
  const auto& wshape = weights.logical_shape();
  if (ashape[0] != spec.c_in || wshape[0] != spec.c_out ||
      wshape[1] != spec.c_in || wshape[2] != spec.kernel ||
      wshape[3] != spec.kernel) {
    throw std::invalid_argument("xnor conv: operand shapes " +
                                shape_to_string(ashape) + " / " +
                                shape_to_string(wshape) +
                                " do not match layer spec");
  }

  // Materialize the -1 padded border once; padded rows are all-zero words,
  // which is exactly "every channel is -1".
  const BinaryTensor* act = &activations;
  BinaryTensor padded;
  if (spec.padding > 0) {
    padded = BinaryTensor::filled_minus_one(
        {ashape[0], ashape[1] + 2 * spec.padding,
         ashape[2] + 2 * spec.padding});
    const std::size_t wpr = activations.words_per_row();
    const std::size_t w = ashape[2];
    const std::size_t padded_w = w + 2 * spec.padding;
    for (std::size_t y = 0; y < ashape[1]; ++y) {
      std::memcpy(padded.row((y + spec.padding) * padded_w + spec.padding),
                  activations.row(y * w), w * wpr * 8);
    }
    act = &padded;
  }

  const std::size_t in_h = act->logical_shape()[1];
  const std::size_t in_w = act->logical_shape()[2];
  ConvSpec inner = spec;
  inner.padding = 0;
  const auto [out_h, out_w] = inner.output_dims(in_h, in_w);

  const std::size_t wpr = act->words_per_row();
  const std::uint64_t mask = act->last_word_mask();
  const std::int64_t n_bits =
      static_cast<std::int64_t>(spec.c_in * spec.kernel * spec.kernel);

  BitConvResult res;
  res.c_out = spec.c_out;
  res.out_h = out_h;
  res.out_w = out_w;
  res.core.resize(spec.c_out * out_h * out_w);

  std::int64_t* out = res.core.data();
  for (std::size_t oc = 0; oc < spec.c_out; ++oc) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        std::int64_t agree = 0;
        for (std::size_t ky = 0; ky < spec.kernel; ++ky) {
          const std::uint64_t* arow =
              act->row((oy * spec.stride + ky) * in_w + ox * spec.stride);
          const std::uint64_t* wrow =
              weights.row((oc * spec.kernel + ky) * spec.kernel);
          for (std::size_t kx = 0; kx < spec.kernel; ++kx) {
            agree += row_agreements(arow, wrow, wpr, mask);
            arow += wpr;
            wrow += wpr;
          }
        }
        *out++ = 2 * agree - n_bits;
      }
    }
  }
  return res;
}

Tensor xnor_popcount_conv(const BinaryTensor& activations,
                          const BinaryTensor& weights,
                          const ScaleVector& scales, const ConvSpec& spec) {
  scales.validate();
  if (scales.alpha.size() != spec.c_out) {
    throw std::invalid_argument(
        "xnor conv: expected " + std::to_string(spec.c_out) + " scales, got " +
        std::to_string(scales.alpha.size()));
  }
  BitConvResult res = xnor_popcount_conv_core(activations, weights, spec);
  Tensor out({res.c_out, res.out_h, res.out_w});
  const std::size_t per = res.out_h * res.out_w;
  for (std::size_t oc = 0; oc < res.c_out; ++oc) {
    const double a = scales.alpha[oc];
    for (std::size_t i = 0; i < per; ++i) {
      out[oc * per + i] = a * static_cast<double>(res.core[oc * per + i]);
    }
  }
  return out;
}

OpsReport count_ops(const ConvSpec& spec, std::size_t out_h,
                    std::size_t out_w, bool binary) {
  spec.validate();
  if (out_h == 0 || out_w == 0) {
    throw std::invalid_argument("count_ops: output extent must be nonzero");
  }
  const std::uint64_t positions =
      static_cast<std::uint64_t>(spec.c_out) * out_h * out_w;
  const std::uint64_t mults_per_position =
      static_cast<std::uint64_t>(spec.c_in) * spec.kernel * spec.kernel;
  const std::uint64_t n_mults = positions * mults_per_position;
  const std::uint64_t n_params =
      static_cast<std::uint64_t>(spec.c_out) * spec.c_in * spec.kernel *
      spec.kernel;

  OpsReport r;
  if (binary) {
    r.binary_mults = n_mults;
    r.real_flops = positions;  // one scale multiply per output value
    r.real_param_bytes = 4 * static_cast<std::uint64_t>(spec.c_out);
    r.binary_param_bytes = (n_params + 7) / 8;
  } else {
    r.real_flops = n_mults;
    r.real_param_bytes = 4 * n_params;
  }
  r.total_ops = r.real_flops + r.binary_mults / 64;
  r.memory_bytes = r.real_param_bytes + r.binary_param_bytes;
  return r;
}

std::string bench_csv_header() {
  return "c_in,c_out,kernel,stride,padding,in_h,in_w,"
         "real_flops,binary_mults,total_ops,memory_bytes,"
         "wall_ns_packed,wall_ns_reference";
}

std::string bench_csv_row(const ConvSpec& spec, std::size_t in_h,
                          std::size_t in_w, const OpsReport& report,
                          std::uint64_t wall_ns_packed,
                          std::uint64_t wall_ns_reference) {
  std::ostringstream os;
  os << spec.c_in << ',' << spec.c_out << ',' << spec.kernel << ','
     << spec.stride << ',' << spec.padding << ',' << in_h << ',' << in_w
     << ',' << report.real_flops << ',' << report.binary_mults << ','
     << report.total_ops << ',' << report.memory_bytes << ','
     << wall_ns_packed << ',' << wall_ns_reference;
  return os.str();
}

}  // namespace bitdet
