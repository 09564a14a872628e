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

#ifndef BITDET_DISCREPANCY_HPP_
#define BITDET_DISCREPANCY_HPP_

#include <cstdint>
#include <vector>

#include "bitdet/proposal.hpp"

namespace bitdet {

// Variances below this floor are clamped before dividing, keeping the
// discrepancy finite on near-constant patches.
inline constexpr double kVarianceFloor = 1e-5;

// Population variance of one channel pooled over BOTH transformed patches
// of the pair (2 * P * P values), floored at kVarianceFloor. This is the
// isotropic per-channel covariance the Mahalanobis form divides by.
double pooled_channel_variance(const ProposalPair& pair, std::size_t channel);

// Mahalanobis information discrepancy of one proposal pair:
//
//   sum_c || Rt_c - Rs_c ||^2 / pooled_variance_c
//
// over the transformed patches. Larger values mean the student disagrees
// more with the teacher on that region, normalized by how spread out the
// pair's responses are.
double mahalanobis_discrepancy(const ProposalPair& pair);

// Number of pairs the bi-level rule keeps: max(1, round(gamma * n)) with
// halves rounding up. gamma must lie in [0, 1]; n must be nonzero.
std::size_t selection_count(std::size_t n, double gamma);

// Selects the selection_count(n, gamma) pairs with the largest
// discrepancy. Ties are broken toward the smaller pair index, which makes
// the result the lexicographically smallest maximizing subset. Returns one
// 0/1 flag per pair.
std::vector<std::uint8_t> select_mask(const std::vector<double>& discrepancies,
                                      double gamma);

}  // namespace bitdet

#endif  // BITDET_DISCREPANCY_HPP_
