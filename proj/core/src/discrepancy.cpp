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

#include "bitdet/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bitdet {
namespace {

void check_pair(const ProposalPair& pair) {
  if (pair.teacher_transformed.rank() != 3 ||
      !pair.teacher_transformed.same_shape(pair.student_transformed)) {
    throw std::invalid_argument(
        "proposal pair: transformed patches must be rank 3 and share a "
        "shape, got " +
        shape_to_string(pair.teacher_transformed.shape()) + " vs " +
        shape_to_string(pair.student_transformed.shape()));
  }
}

}  // namespace

double pooled_channel_variance(const ProposalPair& pair, std::size_t channel) {
  check_pair(pair);
  const std::size_t per = pair.teacher_transformed.dim(1) *
                          pair.teacher_transformed.dim(2);
  const double* t = pair.teacher_transformed.data() + channel * per;
  const double* s = pair.student_transformed.data() + channel * per;
  const double n = 2.0 * static_cast<double>(per);
  double mean = 0.0;
  for (std::size_t i = 0; i < per; ++i) mean += t[i] + s[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < per; ++i) {
    const double dt = t[i] - mean;
    const double ds = s[i] - mean;
    var += dt * dt + ds * ds;
  }
  var /= n;
  return std::max(var, kVarianceFloor);
}

double mahalanobis_discrepancy(const ProposalPair& pair) {
  check_pair(pair);
  const std::size_t channels = pair.teacher_transformed.dim(0);
  const std::size_t per = pair.teacher_transformed.dim(1) *
                          pair.teacher_transformed.dim(2);
  double total = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* t = pair.teacher_transformed.data() + c * per;
    const double* s = pair.student_transformed.data() + c * per;
    double sq = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = t[i] - s[i];
      sq += d * d;
    }
    total += sq / pooled_channel_variance(pair, c);
  }
  return total;
}

std::size_t selection_count(std::size_t n, double gamma) {
  if (n == 0) {
    throw std::invalid_argument("selection_count: no pairs to select from");
  }
  if (!(gamma >= 0.0) || !(gamma <= 1.0)) {
    throw std::invalid_argument("selection_count: gamma must be in [0, 1]");
  }
  const std::size_t k = static_cast<std::size_t>(
      std::floor(gamma * static_cast<double>(n) + 0.5));
  return std::max<std::size_t>(1, std::min(k, n));
}

std::vector<std::uint8_t> select_mask(const std::vector<double>& discrepancies,
                                      double gamma) {
  const std::size_t n = discrepancies.size();
  const std::size_t k = selection_count(n, gamma);
  for (double d : discrepancies) {
    if (!std::isfinite(d)) {
      throw std::invalid_argument("select_mask: non-finite discrepancy");
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (discrepancies[a] != discrepancies[b]) {
      return discrepancies[a] > discrepancies[b];
    }
    return a < b;
  });
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

}  // namespace bitdet
