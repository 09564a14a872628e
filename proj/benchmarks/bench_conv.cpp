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
//
// Micro-benchmarks: the packed XNOR/popcount convolution against the
// real-valued reference on the same geometry, plus the packing step
// itself. Geometries are (c_in, c_out, kernel, extent) with stride 1 and
// same-padding so both paths do identical sliding-window work.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "bitdet/binarize.hpp"
#include "bitdet/bitpack.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"

namespace {

using bitdet::BinaryTensor;
using bitdet::ConvSpec;
using bitdet::Rng;
using bitdet::Tensor;

Tensor random_signs(Rng* rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng->uniform() < 0.5 ? -1.0 : 1.0;
  }
  return t;
}

ConvSpec spec_from_args(const benchmark::State& state) {
  ConvSpec spec;
  spec.c_in = static_cast<std::size_t>(state.range(0));
  spec.c_out = static_cast<std::size_t>(state.range(1));
  spec.kernel = static_cast<std::size_t>(state.range(2));
  spec.stride = 1;
  spec.padding = (spec.kernel - 1) / 2;
  return spec;
}

void BM_PackedConv(benchmark::State& state) {
  const ConvSpec spec = spec_from_args(state);
  const std::size_t extent = static_cast<std::size_t>(state.range(3));
  Rng rng(42);
  const Tensor input = random_signs(&rng, {spec.c_in, extent, extent});
  const Tensor weights =
      random_signs(&rng, {spec.c_out, spec.c_in, spec.kernel, spec.kernel});
  const BinaryTensor packed_in =
      BinaryTensor::pack(bitdet::sign_binarize(input));
  const BinaryTensor packed_w =
      BinaryTensor::pack(bitdet::sign_binarize(weights));
  const bitdet::ScaleVector scales(std::vector<double>(spec.c_out, 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        bitdet::xnor_popcount_conv(packed_in, packed_w, scales, spec));
  }
  const auto [oh, ow] = spec.output_dims(extent, extent);
  const bitdet::OpsReport ops = bitdet::count_ops(spec, oh, ow, true);
  state.counters["binary_mults"] = static_cast<double>(ops.binary_mults);
  state.counters["total_ops"] = static_cast<double>(ops.total_ops);
}

void BM_ReferenceConv(benchmark::State& state) {
  const ConvSpec spec = spec_from_args(state);
  const std::size_t extent = static_cast<std::size_t>(state.range(3));
  Rng rng(42);
  const Tensor input = random_signs(&rng, {spec.c_in, extent, extent});
  const Tensor weights =
      random_signs(&rng, {spec.c_out, spec.c_in, spec.kernel, spec.kernel});
  // The packed path pads with -1; feed the reference the same pre-padded
  // input so both paths compute the same numbers.
  ConvSpec unpadded = spec;
  unpadded.padding = 0;
  const Tensor padded = bitdet::pad_spatial(input, spec.padding, -1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bitdet::conv2d_ref(padded, weights, unpadded));
  }
  const auto [oh, ow] = spec.output_dims(extent, extent);
  const bitdet::OpsReport ops = bitdet::count_ops(spec, oh, ow, false);
  state.counters["real_flops"] = static_cast<double>(ops.real_flops);
}

void BM_Pack(benchmark::State& state) {
  const std::size_t c = static_cast<std::size_t>(state.range(0));
  const std::size_t extent = static_cast<std::size_t>(state.range(1));
  Rng rng(42);
  const Tensor input = random_signs(&rng, {c, extent, extent});
  const bitdet::SignTensor signs = bitdet::sign_binarize(input);
  for (auto _ : state) {
    benchmark::DoNotOptimize(BinaryTensor::pack(signs));
  }
}

// (c_in, c_out, kernel, extent): the toy detector's neck-sized layer, a
// mid-sized block, and a wide layer where packing pays off most.
#define CONV_ARGS                 \
  Args({24, 24, 3, 16})           \
      ->Args({32, 32, 3, 16})     \
      ->Args({64, 64, 3, 32})     \
      ->Args({128, 128, 3, 32})

BENCHMARK(BM_PackedConv)->CONV_ARGS->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ReferenceConv)->CONV_ARGS->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Pack)->Args({64, 32})->Args({128, 64})->Unit(
    benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
