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
#include <limits>
#include <vector>

#include "bitdet/binarize.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using bitdet::ScaleVector;
using bitdet::SignTensor;
using bitdet::Tensor;

TEST_CASE("sign_binarize maps zero and negatives to -1") {
  Tensor t({6});
  t[0] = 0.7;
  t[1] = -0.2;
  t[2] = 0.0;
  t[3] = -0.0;
  t[4] = 1e-300;
  t[5] = -1e-300;
  const SignTensor s = bitdet::sign_binarize(t);
  CHECK(s[0] == 1);
  CHECK(s[1] == -1);
  CHECK(s[2] == -1);  // exact zero goes negative
  CHECK(s[3] == -1);  // negative zero too
  CHECK(s[4] == 1);   // any strictly positive value is +1
  CHECK(s[5] == -1);
}

TEST_CASE("sign_binarize rejects NaN with the offending index") {
  Tensor t({3});
  t[0] = 1.0;
  t[1] = std::numeric_limits<double>::quiet_NaN();
  t[2] = -1.0;
  try {
    bitdet::sign_binarize(t);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("sign tensor validates its entries and round-trips") {
  CHECK_THROWS_AS(SignTensor({2}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(SignTensor({2}, {0, 1}), std::invalid_argument);
  SignTensor ok({2, 2}, {1, -1, -1, 1});
  const Tensor wide = ok.to_tensor();
  CHECK(wide[0] == 1.0);
  CHECK(wide[1] == -1.0);
  CHECK(wide[2] == -1.0);
  CHECK(wide[3] == 1.0);
}

TEST_CASE("optimal_scales is the per-channel mean absolute value") {
  Tensor w({2, 1, 1, 2});
  // channel 0: |0.5|, |-1.5| -> 1.0 ; channel 1: |2|, |-4| -> 3.0
  w.at(0, 0, 0, 0) = 0.5;
  w.at(0, 0, 0, 1) = -1.5;
  w.at(1, 0, 0, 0) = 2.0;
  w.at(1, 0, 0, 1) = -4.0;
  const ScaleVector s = bitdet::optimal_scales(w);
  REQUIRE(s.alpha.size() == 2);
  CHECK(s.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.alpha[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("optimal_scales rejects an all-zero channel") {
  Tensor w({1, 1, 2, 2});
  CHECK_THROWS_AS(bitdet::optimal_scales(w), std::invalid_argument);
}

TEST_CASE("scale vector validation") {
  ScaleVector empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  ScaleVector zero{{1.0, 0.0}};
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
  ScaleVector neg{{-0.5}};
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  ScaleVector nan{{std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(nan.validate(), std::invalid_argument);
  ScaleVector ok{{0.25, 1.5}};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("reconstruction_loss sums squared residuals") {
  Tensor w({1, 1, 1, 3});
  w[0] = 0.5;
  w[1] = -1.5;
  w[2] = 1.0;
  ScaleVector unit{{1.0}};
  // (0.5-1)^2 + (-1.5+1)^2 + (1-1)^2 = 0.25 + 0.25 + 0
  CHECK(bitdet::reconstruction_loss(w, unit) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bitdet::reconstruction_penalty(w, unit) ==
        doctest::Approx(0.5 / 3.0).epsilon(1e-12));
}

TEST_CASE("closed-form scale beats a fine grid search") {
  bitdet::Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8 + rng.uniform_index(24);
    std::vector<double> w(n);
    double max_abs = 0.0;
    for (double& v : w) {
      v = rng.normal();
      if (v == 0.0) v = 0.1;  // keep the channel non-degenerate
      max_abs = std::max(max_abs, std::abs(v));
    }
    Tensor weights({1, 1, 1, n});
    for (std::size_t i = 0; i < n; ++i) weights[i] = w[i];
    const ScaleVector s = bitdet::optimal_scales(weights);
    const double grid =
        oracles::grid_search_scale(w, 1e-4, max_abs + 1e-4, 1e-4);
    const double loss_closed = oracles::channel_residual(w, s.alpha[0]);
    const double loss_grid = oracles::channel_residual(w, grid);
    CHECK(loss_closed <= loss_grid + 1e-9);
  }
}

TEST_CASE("scale perturbations only increase the residual") {
  bitdet::Rng rng(23);
  std::vector<double> w(16);
  for (double& v : w) v = rng.uniform(-2.0, 2.0) + 0.01;
  Tensor weights({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) weights[i] = w[i];
  const ScaleVector s = bitdet::optimal_scales(weights);
  const double at_opt = oracles::channel_residual(w, s.alpha[0]);
  for (double delta : {1e-3, -1e-3, 0.05, -0.05}) {
    CHECK(at_opt <= oracles::channel_residual(w, s.alpha[0] + delta) + 1e-12);
  }
}

TEST_CASE("ste_backward passes gradients only inside the unit window") {
  Tensor up({5});
  Tensor pre({5});
  for (std::size_t i = 0; i < 5; ++i) up[i] = 10.0 + static_cast<double>(i);
  pre[0] = 0.5;    // inside
  pre[1] = -0.99;  // inside
  pre[2] = 1.0;    // boundary counts as inside
  pre[3] = -1.0;   // boundary counts as inside
  pre[4] = 1.01;   // outside
  const Tensor g = bitdet::ste_backward(up, pre);
  CHECK(g[0] == 10.0);
  CHECK(g[1] == 11.0);
  CHECK(g[2] == 12.0);
  CHECK(g[3] == 13.0);
  CHECK(g[4] == 0.0);

  Tensor wrong({4});
  CHECK_THROWS_AS(bitdet::ste_backward(up, wrong), std::invalid_argument);
}
