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

#include <doctest.h>

#include <cstdint>
#include <string>
#include <vector>

#include "bitdet/binarize.hpp"
#include "bitdet/bitpack.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using bitdet::BinaryTensor;
using bitdet::BitConvResult;
using bitdet::ConvSpec;
using bitdet::SignTensor;
using bitdet::Tensor;

namespace {

SignTensor random_signs(bitdet::Rng& rng,
                        const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<std::int8_t> s(n);
  for (auto& v : s) v = rng.uniform_index(2) == 0 ? -1 : 1;
  return SignTensor(shape, s);
}

}  // namespace

TEST_CASE("pack writes +1 as bit 1 in element order") {
  SignTensor s({4}, {1, -1, 1, 1});
  const BinaryTensor packed = BinaryTensor::pack(s);
  CHECK(packed.pack_axis() == 0);
  CHECK(packed.rows() == 1);
  CHECK(packed.row_bits() == 4);
  CHECK(packed.words_per_row() == 1);
  // element i -> bit i: 1,0,1,1 -> 0b1101
  CHECK(packed.row(0)[0] == 0b1101u);
}

TEST_CASE("element 64 lands in word 1 bit 0 and pad bits stay zero") {
  std::vector<std::int8_t> all_plus(65, 1);
  SignTensor s({65}, all_plus);
  const BinaryTensor packed = BinaryTensor::pack(s);
  CHECK(packed.words_per_row() == 2);
  CHECK(packed.row(0)[0] == ~0ull);
  CHECK(packed.row(0)[1] == 1ull);  // only bit 0 set; 63 pad bits zero
  CHECK(packed.last_word_mask() == 1ull);
}

TEST_CASE("rank-3 packing runs along the channel axis") {
  // (C=3, H=1, W=2): row r = y*W + x, bit index = channel
  std::vector<std::int8_t> signs = {
      // c0: (0,0) (0,1)   c1: ...   c2: ...
      1, -1,   // channel 0
      -1, 1,   // channel 1
      1, 1,    // channel 2
  };
  SignTensor s({3, 1, 2}, signs);
  const BinaryTensor packed = BinaryTensor::pack(s);
  CHECK(packed.pack_axis() == 0);
  CHECK(packed.rows() == 2);
  CHECK(packed.row_bits() == 3);
  // spatial (0,0): c0=+1, c1=-1, c2=+1 -> bits 0b101
  CHECK(packed.row(0)[0] == 0b101u);
  // spatial (0,1): c0=-1, c1=+1, c2=+1 -> bits 0b110
  CHECK(packed.row(1)[0] == 0b110u);
}

TEST_CASE("rank-4 packing runs along the input-channel axis") {
  // (O=1, I=2, K=1, K=1): one row per (o, ky, kx), bit index = i
  SignTensor s({1, 2, 1, 1}, {1, -1});
  const BinaryTensor packed = BinaryTensor::pack(s);
  CHECK(packed.pack_axis() == 1);
  CHECK(packed.rows() == 1);
  CHECK(packed.row_bits() == 2);
  CHECK(packed.row(0)[0] == 0b01u);
}

TEST_CASE("pack and unpack are inverse for many shapes") {
  bitdet::Rng rng(31);
  const std::vector<std::vector<std::size_t>> shapes = {
      {1, 3, 3},  {7, 2, 2},   {64, 2, 2},  {65, 3, 1}, {128, 1, 2},
      {130, 2, 2},{2, 5, 1, 1},{4, 64, 3, 3},{3, 65, 1, 1},
  };
  for (const auto& shape : shapes) {
    const SignTensor s = random_signs(rng, shape);
    const BinaryTensor packed = BinaryTensor::pack(s);
    const SignTensor back = packed.unpack();
    REQUIRE(back.shape() == s.shape());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);
  }
}

TEST_CASE("pad bits of the last word are always zero") {
  bitdet::Rng rng(37);
  for (std::size_t c : {std::size_t{7}, std::size_t{63}, std::size_t{65}}) {
    const SignTensor s = random_signs(rng, {c, 2, 2});
    const BinaryTensor packed = BinaryTensor::pack(s);
    const std::uint64_t mask = packed.last_word_mask();
    for (std::size_t r = 0; r < packed.rows(); ++r) {
      const std::uint64_t last = packed.row(r)[packed.words_per_row() - 1];
      CHECK((last & ~mask) == 0ull);
    }
  }
}

TEST_CASE("filled_minus_one has every bit clear") {
  const BinaryTensor z = BinaryTensor::filled_minus_one({5, 3, 3});
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t w = 0; w < z.words_per_row(); ++w) {
      CHECK(z.row(r)[w] == 0ull);
    }
  }
  const SignTensor s = z.unpack();
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == -1);
}

TEST_CASE("1x1 packed conv equals the sign product") {
  SignTensor act({1, 1, 1}, {1});
  SignTensor wplus({1, 1, 1, 1}, {1});
  SignTensor wminus({1, 1, 1, 1}, {-1});
  ConvSpec spec{1, 1, 1, 1, 0};
  CHECK(bitdet::xnor_popcount_conv_core(BinaryTensor::pack(act),
                                        BinaryTensor::pack(wplus), spec)
            .core[0] == 1);
  CHECK(bitdet::xnor_popcount_conv_core(BinaryTensor::pack(act),
                                        BinaryTensor::pack(wminus), spec)
            .core[0] == -1);
}

TEST_CASE("packed conv core matches the plain-loop reference exactly") {
  bitdet::Rng rng(41);
  const struct {
    std::size_t c_in, c_out, kernel, stride, padding, in_h, in_w;
  } cases[] = {
      {1, 1, 1, 1, 0, 3, 3},   {3, 2, 3, 1, 1, 5, 5},
      {64, 2, 3, 1, 1, 4, 4},  {65, 3, 3, 1, 1, 4, 4},
      {128, 1, 1, 1, 0, 3, 3}, {17, 4, 5, 1, 2, 6, 6},
      {33, 2, 3, 2, 1, 5, 5},  {70, 2, 3, 2, 0, 7, 7},
  };
  for (const auto& c : cases) {
    ConvSpec spec{c.c_in, c.c_out, c.kernel, c.stride, c.padding};
    for (int trial = 0; trial < 3; ++trial) {
      const SignTensor act = random_signs(rng, {c.c_in, c.in_h, c.in_w});
      const SignTensor wts =
          random_signs(rng, {c.c_out, c.c_in, c.kernel, c.kernel});
      const BitConvResult got = bitdet::xnor_popcount_conv_core(
          BinaryTensor::pack(act), BinaryTensor::pack(wts), spec);
      // Reference: plain double conv on the widened signs with -1 padding.
      const Tensor want =
          oracles::conv2d_loop(act.to_tensor(), wts.to_tensor(), spec, -1.0);
      REQUIRE(got.c_out == want.dim(0));
      REQUIRE(got.out_h == want.dim(1));
      REQUIRE(got.out_w == want.dim(2));
      for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(got.core[i] == static_cast<std::int64_t>(want[i]));
      }
    }
  }
}

TEST_CASE("scaled wrapper multiplies each output channel by its alpha") {
  bitdet::Rng rng(43);
  const SignTensor act = random_signs(rng, {5, 4, 4});
  const SignTensor wts = random_signs(rng, {3, 5, 3, 3});
  ConvSpec spec{5, 3, 3, 1, 1};
  bitdet::ScaleVector scales{{0.5, 1.25, 2.0}};
  const BitConvResult core = bitdet::xnor_popcount_conv_core(
      BinaryTensor::pack(act), BinaryTensor::pack(wts), spec);
  const Tensor out = bitdet::xnor_popcount_conv(
      BinaryTensor::pack(act), BinaryTensor::pack(wts), scales, spec);
  REQUIRE(out.dim(0) == 3);
  std::size_t i = 0;
  for (std::size_t oc = 0; oc < 3; ++oc) {
    for (std::size_t p = 0; p < out.dim(1) * out.dim(2); ++p, ++i) {
      CHECK(out[i] == scales.alpha[oc] * static_cast<double>(core.core[i]));
    }
  }
}

TEST_CASE("packed conv validates operand shapes") {
  bitdet::Rng rng(47);
  const SignTensor act = random_signs(rng, {4, 4, 4});
  const SignTensor wts = random_signs(rng, {2, 5, 3, 3});  // 5 != 4
  ConvSpec spec{4, 2, 3, 1, 1};
  CHECK_THROWS_AS(bitdet::xnor_popcount_conv_core(BinaryTensor::pack(act),
                                                  BinaryTensor::pack(wts),
                                                  spec),
                  std::invalid_argument);
}

TEST_CASE("ops accounting for the reference 64-channel layer") {
  // 64 -> 64 channels, 3x3 kernel, 32x32 output.
  ConvSpec spec{64, 64, 3, 1, 1};
  const bitdet::OpsReport binary = bitdet::count_ops(spec, 32, 32, true);
  CHECK(binary.binary_mults == 37748736ull);         // 64*9*64*32*32
  CHECK(binary.binary_mults / 64 == 589824ull);      // packed-word share
  CHECK(binary.real_flops == 65536ull);              // one scale per output
  CHECK(binary.total_ops == 655360ull);              // 65536 + 589824
  CHECK(binary.binary_param_bytes == 4608ull);       // 36864 bits / 8
  CHECK(binary.real_param_bytes == 256ull);          // 64 scales * 4 bytes
  CHECK(binary.memory_bytes == 4864ull);

  const bitdet::OpsReport real = bitdet::count_ops(spec, 32, 32, false);
  CHECK(real.real_flops == 37748736ull);
  CHECK(real.binary_mults == 0ull);
  CHECK(real.total_ops == 37748736ull);
  CHECK(real.real_param_bytes == 147456ull);         // 36864 * 4 bytes
  CHECK(real.memory_bytes == 147456ull);
}

TEST_CASE("binary accounting floors sub-word contributions") {
  // 1x1x1 kernel on one channel: 16 binary mults over a 4x4 output is less
  // than one 64-bit word per output, so the packed share floors to zero.
  ConvSpec spec{1, 1, 1, 1, 0};
  const bitdet::OpsReport r = bitdet::count_ops(spec, 4, 4, true);
  CHECK(r.binary_mults == 16ull);
  CHECK(r.total_ops == r.real_flops + 0ull);
}

TEST_CASE("more input channels never reduce total ops") {
  // Output geometry 8x8 with 2 output channels and a 3x3 kernel: each added
  // input channel adds 2*8*8*9 = 1152 binary mults (18 packed words), so
  // total_ops must strictly grow.
  std::uint64_t prev = 0;
  for (std::size_t c_in = 4; c_in <= 68; c_in += 8) {
    ConvSpec spec{c_in, 2, 3, 1, 1};
    const bitdet::OpsReport r = bitdet::count_ops(spec, 8, 8, true);
    if (prev != 0) CHECK(r.total_ops > prev);
    prev = r.total_ops;
  }
}

TEST_CASE("bench csv format is stable") {
  CHECK(bitdet::bench_csv_header() ==
        "c_in,c_out,kernel,stride,padding,in_h,in_w,real_flops,binary_mults,"
        "total_ops,memory_bytes,wall_ns_packed,wall_ns_reference");
  ConvSpec spec{64, 64, 3, 1, 1};
  const bitdet::OpsReport r = bitdet::count_ops(spec, 32, 32, true);
  const std::string row = bitdet::bench_csv_row(spec, 32, 32, r, 1000, 2000);
  CHECK(row == "64,64,3,1,1,32,32,65536,37748736,655360,4864,1000,2000");
}
