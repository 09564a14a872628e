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

#ifndef BITDET_BITPACK_HPP_
#define BITDET_BITPACK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "bitdet/binarize.hpp"
#include "bitdet/tensor.hpp"

namespace bitdet {

// Sign tensor packed into 64-bit words, one bit per element: +1 -> 1,
// -1 -> 0. Packing runs along the input-channel axis so a convolution's
// inner reduction walks contiguous words:
//
//   rank 4 (O, I, K, K): packed along axis 1, one row per (o, ky, kx)
//   other ranks:         packed along axis 0, one row per remaining index
//
// Rows are ordered row-major over the non-packed axes. Each row occupies
// ceil(row_bits / 64) words; unused high bits of the final word are always
// zero so masked popcounts never see garbage.
class BinaryTensor {
 public:
  BinaryTensor() = default;

  static BinaryTensor pack(const SignTensor& s);

  // All-bits-zero tensor, i.e. every logical element is -1. Used to build
  // padded borders.
  static BinaryTensor filled_minus_one(std::vector<std::size_t> shape);

  SignTensor unpack() const;

  const std::vector<std::size_t>& logical_shape() const { return shape_; }
  std::size_t pack_axis() const { return pack_axis_; }
  std::size_t row_bits() const { return row_bits_; }
  std::size_t words_per_row() const { return words_per_row_; }
  std::size_t rows() const { return rows_; }

  std::uint64_t* row(std::size_t r) { return &words_[r * words_per_row_]; }
  const std::uint64_t* row(std::size_t r) const {
    return &words_[r * words_per_row_];
  }

  // Mask selecting the valid bits of each row's final word.
  std::uint64_t last_word_mask() const;

  std::size_t packed_bytes() const { return words_.size() * 8; }

 private:
  std::vector<std::size_t> shape_;
  std::size_t pack_axis_ = 0;
  std::size_t row_bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::uint64_t> words_;
};

// Integer output of the packed convolution: exact +/-1 dot products.
struct BitConvResult {
  std::size_t c_out = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  // Row-major (c_out, out_h, out_w); each value is
  // 2 * agreements - (c_in * kernel^2), i.e. the exact +/-1 inner product.
  std::vector<std::int64_t> core;
};

// XNOR/popcount convolution on packed operands. `activations` is a packed
// rank-3 (C, H, W) tensor, `weights` a packed rank-4 (O, C, K, K) tensor.
// spec.padding > 0 pads the activation border with -1 (bit 0) before the
// sliding window runs; zero-padding has no representation in a binary
// tensor. The result is exact integer arithmetic, no rounding anywhere.
BitConvResult xnor_popcount_conv_core(const BinaryTensor& activations,
                                      const BinaryTensor& weights,
                                      const ConvSpec& spec);

// Scaled wrapper: output channel c is alpha[c] * core. Returns a real
// tensor of shape (C_out, H_out, W_out).
Tensor xnor_popcount_conv(const BinaryTensor& activations,
                          const BinaryTensor& weights,
                          const ScaleVector& scales, const ConvSpec& spec);

// Work and storage accounting for one convolution layer.
//
// Counts are multiplications only (adds are not counted). A binarized
// layer's multiplications happen in 64-bit XNOR words, so its contribution
// to total_ops is binary_mults / 64 (integer floor); the per-channel scale
// multiplies stay real. Storage: real parameters cost 4 bytes, binary
// parameters one bit (rounded up to whole bytes), plus 4 bytes per output
// channel for the scales of a binary layer.
struct OpsReport {
  std::uint64_t real_flops = 0;         // real multiplications
  std::uint64_t binary_mults = 0;       // +/-1 multiplications
  std::uint64_t total_ops = 0;          // real_flops + binary_mults / 64
  std::uint64_t real_param_bytes = 0;   // 4 bytes per real parameter
  std::uint64_t binary_param_bytes = 0; // ceil(binary parameter count / 8)
  std::uint64_t memory_bytes = 0;       // real_param_bytes + binary_param_bytes
};

// Accounting for a layer with the given output extent. `binary` selects
// the binarized variant (packed weights + per-channel scales) versus an
// all-real layer of the same geometry.
OpsReport count_ops(const ConvSpec& spec, std::size_t out_h,
                    std::size_t out_w, bool binary);

// CSV row format shared by the bench command and the micro-benchmarks.
std::string bench_csv_header();
std::string bench_csv_row(const ConvSpec& spec, std::size_t in_h,
                          std::size_t in_w, const OpsReport& report,
                          std::uint64_t wall_ns_packed,
                          std::uint64_t wall_ns_reference);

}  // namespace bitdet

#endif  // BITDET_BITPACK_HPP_
