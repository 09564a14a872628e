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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>
#include <vector>

#include "bitdet/rng.hpp"
#include "bitdet/serialize.hpp"
#include "bitdet/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using bitdet::ConvSpec;
using bitdet::Tensor;

TEST_CASE("tensor stores row-major with trailing axis fastest") {
  Tensor t({2, 3, 4});
  REQUIRE(t.size() == 24);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  // flat index = (c * H + y) * W + x
  CHECK(t.at(0, 0, 0) == 0.0);
  CHECK(t.at(0, 0, 3) == 3.0);
  CHECK(t.at(0, 1, 0) == 4.0);
  CHECK(t.at(1, 0, 0) == 12.0);
  CHECK(t.at(1, 2, 3) == 23.0);

  Tensor q({2, 2, 2, 2});
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<double>(i);
  CHECK(q.at(0, 0, 0, 1) == 1.0);
  CHECK(q.at(0, 0, 1, 0) == 2.0);
  CHECK(q.at(0, 1, 0, 0) == 4.0);
  CHECK(q.at(1, 0, 0, 0) == 8.0);
}

TEST_CASE("tensor rejects empty and zero-sized shapes") {
  CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({3, 0, 2}), std::invalid_argument);
}

TEST_CASE("check_finite names the offending tensor") {
  Tensor t({2});
  t[0] = 1.0;
  t[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    t.check_finite("gadget");
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("gadget") != std::string::npos);
  }
}

TEST_CASE("conv spec validation and output dims") {
  ConvSpec spec{3, 8, 3, 1, 1};
  CHECK_NOTHROW(spec.validate());

  auto [oh, ow] = spec.output_dims(8, 8);
  CHECK(oh == 8);
  CHECK(ow == 8);

  ConvSpec strided{3, 8, 3, 2, 1};
  std::tie(oh, ow) = strided.output_dims(9, 9);  // (9 + 2 - 3) / 2 + 1
  CHECK(oh == 5);
  CHECK(ow == 5);

  ConvSpec bad{0, 8, 3, 1, 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // stride must land exactly on the last window
  ConvSpec uneven{1, 1, 3, 2, 0};
  CHECK_THROWS_AS(uneven.output_dims(8, 8), std::invalid_argument);
  // too small even for one window
  ConvSpec wide{1, 1, 5, 1, 0};
  CHECK_THROWS_AS(wide.output_dims(3, 3), std::invalid_argument);
}

TEST_CASE("conv2d_ref doubles a single value") {
  Tensor input({1, 2, 2});
  input.at(0, 0, 0) = 1.0;
  input.at(0, 0, 1) = 2.0;
  input.at(0, 1, 0) = 3.0;
  input.at(0, 1, 1) = 4.0;
  Tensor weight({1, 1, 1, 1});
  weight[0] = 2.0;
  ConvSpec spec{1, 1, 1, 1, 0};
  const Tensor out = bitdet::conv2d_ref(input, weight, spec);
  CHECK(out.at(0, 0, 0) == 2.0);
  CHECK(out.at(0, 0, 1) == 4.0);
  CHECK(out.at(0, 1, 0) == 6.0);
  CHECK(out.at(0, 1, 1) == 8.0);
}

TEST_CASE("conv2d_ref delta kernel picks the window centre") {
  bitdet::Rng rng(7);
  Tensor input = testutil::random_tensor(rng, {2, 5, 5}, -1.0, 1.0);
  Tensor weight({1, 2, 3, 3});
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = 0.0;
  weight.at(0, 1, 1, 1) = 1.0;  // select channel 1, centre tap
  ConvSpec spec{2, 1, 3, 1, 1};
  const Tensor out = bitdet::conv2d_ref(input, weight, spec);
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 5; ++x) {
      CHECK(out.at(0, y, x) == input.at(1, y, x));
    }
  }
}

TEST_CASE("conv2d_ref matches an independent loop on random layers") {
  bitdet::Rng rng(42);
  const struct {
    std::size_t c_in, c_out, kernel, stride, padding, in_h, in_w;
  } cases[] = {
      {1, 1, 1, 1, 0, 4, 4},  {3, 5, 3, 1, 1, 7, 9},  {4, 2, 3, 2, 1, 9, 9},
      {2, 3, 5, 1, 2, 8, 6},  {6, 4, 3, 1, 0, 5, 5},  {1, 2, 5, 2, 2, 7, 7},
      {8, 8, 1, 1, 0, 6, 6},  {5, 1, 3, 2, 0, 7, 11},
  };
  for (const auto& c : cases) {
    ConvSpec spec{c.c_in, c.c_out, c.kernel, c.stride, c.padding};
    for (int trial = 0; trial < 4; ++trial) {
      Tensor input =
          testutil::random_tensor(rng, {c.c_in, c.in_h, c.in_w}, -2.0, 2.0);
      Tensor weight = testutil::random_tensor(
          rng, {c.c_out, c.c_in, c.kernel, c.kernel}, -1.0, 1.0);
      const Tensor got = bitdet::conv2d_ref(input, weight, spec);
      const Tensor want = oracles::conv2d_loop(input, weight, spec, 0.0);
      REQUIRE(got.same_shape(want));
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conv2d_ref rejects mismatched shapes and non-finite input") {
  Tensor input({2, 4, 4});
  Tensor weight({1, 3, 3, 3});  // claims 3 input channels
  ConvSpec spec{3, 1, 3, 1, 1};
  CHECK_THROWS_AS(bitdet::conv2d_ref(input, weight, spec),
                  std::invalid_argument);

  Tensor ok_w({1, 2, 3, 3});
  ConvSpec ok_spec{2, 1, 3, 1, 1};
  input[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bitdet::conv2d_ref(input, ok_w, ok_spec),
                  std::runtime_error);
}

TEST_CASE("pad_spatial writes the fill value in the border only") {
  Tensor t({1, 2, 2});
  t.at(0, 0, 0) = 1.0;
  t.at(0, 0, 1) = 2.0;
  t.at(0, 1, 0) = 3.0;
  t.at(0, 1, 1) = 4.0;
  const Tensor p = bitdet::pad_spatial(t, 1, -1.0);
  REQUIRE(p.dim(1) == 4);
  REQUIRE(p.dim(2) == 4);
  CHECK(p.at(0, 0, 0) == -1.0);
  CHECK(p.at(0, 0, 3) == -1.0);
  CHECK(p.at(0, 3, 0) == -1.0);
  CHECK(p.at(0, 1, 1) == 1.0);
  CHECK(p.at(0, 1, 2) == 2.0);
  CHECK(p.at(0, 2, 1) == 3.0);
  CHECK(p.at(0, 2, 2) == 4.0);
  double border_sum = 0.0;
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      if (y == 0 || y == 3 || x == 0 || x == 3) border_sum += p.at(0, y, x);
    }
  }
  CHECK(border_sum == -12.0);  // 12 border cells, all -1
}

TEST_CASE("channel_reduce hand values use the population convention") {
  Tensor t({1, 2, 2});
  t[0] = 0.1;
  t[1] = 0.3;
  t[2] = 0.2;
  t[3] = 0.4;
  const std::vector<double> mean =
      bitdet::channel_reduce(t, bitdet::ChannelStat::kMean);
  const std::vector<double> var =
      bitdet::channel_reduce(t, bitdet::ChannelStat::kVariance);
  REQUIRE(mean.size() == 1);
  CHECK(mean[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(var[0] == doctest::Approx(0.0125).epsilon(1e-12));

  Tensor s({2, 1, 2});
  s[0] = 0.5;
  s[1] = -1.5;
  s[2] = 2.0;
  s[3] = -2.0;
  const std::vector<double> mean_abs =
      bitdet::channel_reduce(s, bitdet::ChannelStat::kMeanAbs);
  REQUIRE(mean_abs.size() == 2);
  CHECK(mean_abs[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_abs[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("channel_reduce agrees with two-pass statistics") {
  bitdet::Rng rng(9);
  Tensor t = testutil::random_tensor(rng, {4, 3, 5}, -3.0, 3.0);
  const std::vector<double> mean =
      bitdet::channel_reduce(t, bitdet::ChannelStat::kMean);
  const std::vector<double> var =
      bitdet::channel_reduce(t, bitdet::ChannelStat::kVariance);
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<double> vals;
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 5; ++x) vals.push_back(t.at(c, y, x));
    }
    double m = 0.0, v = 0.0;
    oracles::two_pass_stats(vals, &m, &v);
    CHECK(mean[c] == doctest::Approx(m).epsilon(1e-12));
    CHECK(var[c] == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("tensor stream layout is stable byte for byte") {
  Tensor t({1, 2});
  t[0] = 1.0;
  t[1] = -2.5;
  std::ostringstream os;
  bitdet::write_tensor(os, t);
  const std::string got = os.str();

  // magic, version, rank, dims, then IEEE-754 single payload,
  // everything little-endian.
  const unsigned char want[] = {
      'I',  'D',  'A',  'T',              // magic
      0x01, 0x00, 0x00, 0x00,             // version 1
      0x02, 0x00, 0x00, 0x00,             // rank 2
      0x01, 0x00, 0x00, 0x00,             // dim 0
      0x02, 0x00, 0x00, 0x00,             // dim 1
      0x00, 0x00, 0x80, 0x3F,             // 1.0f
      0x00, 0x00, 0x20, 0xC0,             // -2.5f
  };
  REQUIRE(got.size() == sizeof(want));
  for (std::size_t i = 0; i < sizeof(want); ++i) {
    CHECK(static_cast<unsigned char>(got[i]) == want[i]);
  }
}

TEST_CASE("tensor stream round-trips quantized values exactly") {
  bitdet::Rng rng(123);
  Tensor t = testutil::random_tensor(rng, {3, 4, 5}, -10.0, 10.0);
  std::ostringstream os;
  bitdet::write_tensor(os, t);
  std::istringstream is(os.str());
  const Tensor back = bitdet::read_tensor(is);
  REQUIRE(back.same_shape(t));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST_CASE("tensor files round-trip through disk") {
  testutil::TempDir dir;
  bitdet::Rng rng(5);
  Tensor t = testutil::random_tensor(rng, {2, 8}, -1.0, 1.0);
  const std::string path = dir.file("t.idat");
  bitdet::save_tensor(path, t);
  const Tensor back = bitdet::load_tensor(path);
  REQUIRE(back.same_shape(t));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST_CASE("tensor stream rejects malformed input") {
  Tensor t({2, 2});
  for (std::size_t i = 0; i < 4; ++i) t[i] = static_cast<double>(i);
  std::ostringstream os;
  bitdet::write_tensor(os, t);
  const std::string good = os.str();

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    std::istringstream is(bad);
    try {
      bitdet::read_tensor(is);
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("IDAT") != std::string::npos);
    }
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 0x7F;
    std::istringstream is(bad);
    CHECK_THROWS_AS(bitdet::read_tensor(is), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::string bad = good.substr(0, good.size() - 2);
    std::istringstream is(bad);
    CHECK_THROWS_AS(bitdet::read_tensor(is), std::runtime_error);
  }
  SUBCASE("zero dimension") {
    std::string bad = good;
    bad[12] = 0x00;  // dim 0 low byte
    std::istringstream is(bad);
    CHECK_THROWS_AS(bitdet::read_tensor(is), std::runtime_error);
  }
  SUBCASE("missing file names the path") {
    try {
      bitdet::load_tensor("/nonexistent/nope.idat");
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("nope.idat") != std::string::npos);
    }
  }
}

TEST_CASE("rng streams are deterministic and role-separated") {
  bitdet::Rng a(42);
  bitdet::Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform(0.0, 1.0) == b.uniform(0.0, 1.0));
  }
  CHECK(bitdet::derive_seed(42, 1) != bitdet::derive_seed(42, 2));
  CHECK(bitdet::derive_seed(42, 1) == bitdet::derive_seed(42, 1));
  CHECK(bitdet::derive_seed(42, 1) != bitdet::derive_seed(43, 1));

  bitdet::Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform(0.0, 1.0);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const std::size_t k = c.uniform_index(10);
    CHECK(k < 10);
  }

  // shuffle is a permutation
  std::vector<std::size_t> order(20);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  bitdet::Rng d(3);
  d.shuffle(order);
  std::vector<bool> seen(20, false);
  for (std::size_t v : order) {
    REQUIRE(v < 20);
    CHECK(!seen[v]);
    seen[v] = true;
  }
}
