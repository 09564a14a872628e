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

#ifndef BITDET_DISTILL_HPP_
#define BITDET_DISTILL_HPP_

#include <cstdint>
#include <vector>

#include "bitdet/proposal.hpp"

namespace bitdet {

// Lower clamp applied to the student/teacher covariance so the log term
// and the division stay defined when the two patches decorrelate.
inline constexpr double kCovarianceClamp = 1e-8;

// Covariance between the student and teacher transformed values of one
// channel: E[rs * rt] - E[rs] * E[rt] over the P*P cells, clamped from
// below at kCovarianceClamp.
double proposal_covariance(const ProposalPair& pair, std::size_t channel);

// All per-channel covariances of a pair.
std::vector<double> channel_covariances(const ProposalPair& pair);

// Entropy distillation loss of one pair. Per channel c with difference
// d_i = rs_i - rt_i and covariance V_c:
//
//   L_c = sum_i d_i  +  sum_i d_i^2 / V_c  +  log(V_c)
//
// and the loss is the mean of L_c over channels.
double entropy_loss(const ProposalPair& pair);

// Same loss but with externally supplied per-channel covariances. This is
// the seam used to verify gradients with the covariance frozen.
double entropy_loss_given_cov(const ProposalPair& pair,
                              const std::vector<double>& covariances);

// How the covariance is treated when differentiating.
enum class GradCovMode {
  kExact,   // V_c depends on rs; the chain rule includes dV/drs
  kFrozen,  // V_c treated as a constant
};

// Analytic gradient of entropy_loss with respect to the student
// transformed patch. In kExact mode channels whose raw covariance sits at
// the clamp contribute no covariance gradient (the clamp is constant).
Tensor entropy_loss_grad(const ProposalPair& pair,
                         GradCovMode mode = GradCovMode::kExact);

// Mean entropy loss over the pairs whose mask flag is 1. Throws if the
// mask length mismatches or selects nothing.
double distill_loss_total(const std::vector<ProposalPair>& pairs,
                          const std::vector<std::uint8_t>& mask);

// Scalar combination of the three training terms.
struct LossBreakdown {
  double l_gt = 0.0;     // detection loss against ground truth
  double l_p = 0.0;      // proposal distillation loss
  double l_r = 0.0;      // weight reconstruction penalty
  double total = 0.0;    // l_gt + lambda * l_p + mu * l_r
};

// total = l_gt + lambda * l_p + mu * l_r.
double total_loss(double l_gt, double l_p, double l_r, double lambda,
                  double mu);

}  // namespace bitdet

#endif  // BITDET_DISTILL_HPP_
