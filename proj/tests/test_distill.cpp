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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bitdet/discrepancy.hpp"
#include "bitdet/distill.hpp"
#include "bitdet/proposal.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using bitdet::ProposalPair;
using bitdet::Tensor;

namespace {

ProposalPair pair_from_values(const std::vector<double>& teacher,
                              const std::vector<double>& student,
                              std::size_t channels, std::size_t patch) {
  ProposalPair p;
  p.teacher_transformed =
      Tensor({channels, patch, patch}, std::vector<double>(teacher));
  p.student_transformed =
      Tensor({channels, patch, patch}, std::vector<double>(student));
  p.teacher_patch = p.teacher_transformed;
  p.student_patch = p.student_transformed;
  return p;
}

}  // namespace

TEST_CASE("proposal_covariance is E[st] - E[s]E[t] with a lower clamp") {
  // student {0,1,0,1}, teacher {0,2,0,2}:
  // E[st] = 1, E[s] = 0.5, E[t] = 1 -> covariance 0.5
  const ProposalPair p = pair_from_values({0, 2, 0, 2}, {0, 1, 0, 1}, 1, 2);
  CHECK(bitdet::proposal_covariance(p, 0) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // a constant student decorrelates completely: clamp engages
  const ProposalPair flat = pair_from_values({0, 2, 0, 2}, {1, 1, 1, 1}, 1, 2);
  CHECK(bitdet::proposal_covariance(flat, 0) == bitdet::kCovarianceClamp);

  // anti-correlated patches clamp too (raw covariance is negative)
  const ProposalPair anti = pair_from_values({0, 2, 0, 2}, {2, 0, 2, 0}, 1, 2);
  CHECK(bitdet::proposal_covariance(anti, 0) == bitdet::kCovarianceClamp);
}

TEST_CASE("entropy loss of a perfectly matched pair is the log variance") {
  // rs == rt: differences vanish, loss reduces to log(Var(rt)).
  const ProposalPair p = pair_from_values({0, 1, 0, 1}, {0, 1, 0, 1}, 1, 2);
  CHECK(bitdet::entropy_loss(p) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("entropy loss matches the straight-line oracle") {
  bitdet::Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t channels = 1 + rng.uniform_index(8);
    const std::size_t patch = 2 + rng.uniform_index(6);
    const ProposalPair p =
        testutil::make_correlated_pair(rng, channels, patch, 4.0);
    const double got = bitdet::entropy_loss(p);
    const double want =
        oracles::straight_entropy_loss(p, bitdet::kCovarianceClamp);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("entropy_loss_given_cov agrees when given the true covariances") {
  bitdet::Rng rng(5);
  const ProposalPair p = testutil::make_correlated_pair(rng, 4, 5, 4.0);
  const std::vector<double> covs = bitdet::channel_covariances(p);
  CHECK(bitdet::entropy_loss_given_cov(p, covs) ==
        doctest::Approx(bitdet::entropy_loss(p)).epsilon(1e-12));
  CHECK_THROWS_AS(bitdet::entropy_loss_given_cov(p, {1.0}),
                  std::invalid_argument);
}

TEST_CASE("gradient on a constant identical pair is uniform") {
  // Both patches constant and equal: every difference is zero and the
  // covariance clamps, so only the linear term survives. The derivative of
  // sum_i d_i with respect to rs_i is exactly 1, averaged over C channels.
  const std::size_t channels = 2, patch = 3;
  std::vector<double> vals(channels * patch * patch, 0.75);
  const ProposalPair p = pair_from_values(vals, vals, channels, patch);
  const Tensor g = bitdet::entropy_loss_grad(p, bitdet::GradCovMode::kExact);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] ==
          doctest::Approx(1.0 / static_cast<double>(channels)).epsilon(1e-12));
  }
}

TEST_CASE("frozen-covariance gradient matches finite differences") {
  bitdet::Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const ProposalPair p = testutil::make_correlated_pair(rng, 3, 4, 4.0);
    const std::vector<double> covs = bitdet::channel_covariances(p);
    const Tensor grad =
        bitdet::entropy_loss_grad(p, bitdet::GradCovMode::kFrozen);

    const double h = 1e-6;
    ProposalPair probe = p;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double keep = probe.student_transformed[i];
      probe.student_transformed[i] = keep + h;
      const double up = bitdet::entropy_loss_given_cov(probe, covs);
      probe.student_transformed[i] = keep - h;
      const double down = bitdet::entropy_loss_given_cov(probe, covs);
      probe.student_transformed[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("exact gradient matches finite differences of the full loss") {
  bitdet::Rng rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ProposalPair p = testutil::make_correlated_pair(rng, 4, 5, 4.0);
    const Tensor grad =
        bitdet::entropy_loss_grad(p, bitdet::GradCovMode::kExact);
    const Tensor fd = oracles::fd_entropy_grad(p, 1e-6);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      // Unit floor: finite differences of an O(1..10) loss carry ~1e-8
      // absolute noise in double precision, so near-zero components are
      // held to an absolute 1e-6 instead of a pure ratio.
      const double rel = std::abs(grad[i] - fd[i]) /
                         std::max({1.0, std::abs(fd[i]), std::abs(grad[i])});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("distill_loss_total averages over the selected pairs only") {
  bitdet::Rng rng(13);
  std::vector<ProposalPair> pairs;
  for (int i = 0; i < 4; ++i) {
    pairs.push_back(testutil::make_correlated_pair(rng, 2, 3, 4.0));
  }
  const std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  const double got = bitdet::distill_loss_total(pairs, mask);
  const double want =
      0.5 * (bitdet::entropy_loss(pairs[0]) + bitdet::entropy_loss(pairs[2]));
  CHECK(got == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(bitdet::distill_loss_total(pairs, {1, 0, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bitdet::distill_loss_total(pairs, {0, 0, 0, 0}),
                  std::invalid_argument);
}

TEST_CASE("total_loss combines the three terms with lambda and mu") {
  CHECK(bitdet::total_loss(1.0, 2.0, 3.0, 0.4, 1e-4) ==
        doctest::Approx(1.8003).epsilon(1e-12));
  CHECK(bitdet::total_loss(0.0, 0.0, 0.0, 0.4, 1e-4) == 0.0);
  CHECK_THROWS_AS(
      bitdet::total_loss(std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0,
                         0.4, 1e-4),
      std::invalid_argument);
  CHECK_THROWS_AS(
      bitdet::total_loss(0.0, std::numeric_limits<double>::infinity(), 0.0,
                         0.4, 1e-4),
      std::invalid_argument);
}

TEST_CASE("selection plus loss pipeline stays finite on hard inputs") {
  // Near-constant and anti-correlated patches push both the variance floor
  // and the covariance clamp; the pipeline must stay finite throughout.
  std::vector<ProposalPair> pairs;
  pairs.push_back(pair_from_values({1, 1, 1, 1}, {1, 1, 1, 1}, 1, 2));
  pairs.push_back(pair_from_values({0, 2, 0, 2}, {2, 0, 2, 0}, 1, 2));
  pairs.push_back(pair_from_values({0, 1, 0, 1}, {0, 1, 0, 1}, 1, 2));
  std::vector<double> eps;
  for (const auto& p : pairs) {
    eps.push_back(bitdet::mahalanobis_discrepancy(p));
  }
  const auto mask = bitdet::select_mask(eps, 0.6);
  const double loss = bitdet::distill_loss_total(pairs, mask);
  CHECK(std::isfinite(loss));
  for (const auto& p : pairs) {
    const Tensor g = bitdet::entropy_loss_grad(p);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::isfinite(g[i]));
  }
}
