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

#include "bitdet/distill.hpp"

#include <cmath>
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

// Raw (unclamped) covariance of channel c.
double raw_covariance(const ProposalPair& pair, std::size_t c,
                      std::size_t per) {
  const double* t = pair.teacher_transformed.data() + c * per;
  const double* s = pair.student_transformed.data() + c * per;
  const double m = static_cast<double>(per);
  double sum_t = 0.0, sum_s = 0.0, sum_ts = 0.0;
  for (std::size_t i = 0; i < per; ++i) {
    sum_t += t[i];
    sum_s += s[i];
    sum_ts += s[i] * t[i];
  }
  return sum_ts / m - (sum_s / m) * (sum_t / m);
}

}  // namespace

double proposal_covariance(const ProposalPair& pair, std::size_t channel) {
  check_pair(pair);
  const std::size_t per = pair.teacher_transformed.dim(1) *
                          pair.teacher_transformed.dim(2);
  return std::max(raw_covariance(pair, channel, per), kCovarianceClamp);
}

std::vector<double> channel_covariances(const ProposalPair& pair) {
  check_pair(pair);
  const std::size_t channels = pair.teacher_transformed.dim(0);
  std::vector<double> covs(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    covs[c] = proposal_covariance(pair, c);
  }
  return covs;
}

double entropy_loss_given_cov(const ProposalPair& pair,
                              const std::vector<double>& covariances) {
  check_pair(pair);
  const std::size_t channels = pair.teacher_transformed.dim(0);
  if (covariances.size() != channels) {
    throw std::invalid_argument("entropy_loss_given_cov: expected " +
                                std::to_string(channels) + " covariances");
  }
  const std::size_t per = pair.teacher_transformed.dim(1) *
                          pair.teacher_transformed.dim(2);
  double total = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* t = pair.teacher_transformed.data() + c * per;
    const double* s = pair.student_transformed.data() + c * per;
    const double v = covariances[c];
    if (!(v > 0.0)) {
      throw std::invalid_argument(
          "entropy_loss_given_cov: covariance must be positive");
    }
    double sum_d = 0.0, sum_d2 = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = s[i] - t[i];
      sum_d += d;
      sum_d2 += d * d;
    }
    total += sum_d + sum_d2 / v + std::log(v);
  }
  return total / static_cast<double>(channels);
}

double entropy_loss(const ProposalPair& pair) {
  return entropy_loss_given_cov(pair, channel_covariances(pair));
}

Tensor entropy_loss_grad(const ProposalPair& pair, GradCovMode mode) {
  check_pair(pair);
  const std::size_t channels = pair.teacher_transformed.dim(0);
  const std::size_t per = pair.teacher_transformed.dim(1) *
                          pair.teacher_transformed.dim(2);
  const double m = static_cast<double>(per);
  const double inv_channels = 1.0 / static_cast<double>(channels);

  Tensor grad(pair.student_transformed.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const double* t = pair.teacher_transformed.data() + c * per;
    const double* s = pair.student_transformed.data() + c * per;
    double* g = grad.data() + c * per;

    const double raw = raw_covariance(pair, c, per);
    const bool clamped = raw < kCovarianceClamp;
    const double v = clamped ? kCovarianceClamp : raw;

    double mean_t = 0.0, sum_d2 = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      mean_t += t[i];
      const double d = s[i] - t[i];
      sum_d2 += d * d;
    }
    mean_t /= m;

    // d/drs_i of sum_j d_j + sum_j d_j^2 / V + log(V). The covariance
    // V = E[rs*rt] - E[rs]E[rt] has dV/drs_i = (rt_i - E[rt]) / M; a
    // clamped or frozen covariance contributes nothing through V.
    const bool track_cov = (mode == GradCovMode::kExact) && !clamped;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = s[i] - t[i];
      double gi = 1.0 + 2.0 * d / v;
      if (track_cov) {
        const double dv = (t[i] - mean_t) / m;
        gi += dv * (1.0 / v - sum_d2 / (v * v));
      }
      g[i] = gi * inv_channels;
    }
  }
  return grad;
}

double distill_loss_total(const std::vector<ProposalPair>& pairs,
                          const std::vector<std::uint8_t>& mask) {
  if (pairs.size() != mask.size()) {
    throw std::invalid_argument("distill_loss_total: mask length " +
                                std::to_string(mask.size()) +
                                " does not match " +
                                std::to_string(pairs.size()) + " pairs");
  }
  double total = 0.0;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!mask[i]) continue;
    total += entropy_loss(pairs[i]);
    ++selected;
  }
  if (selected == 0) {
    throw std::invalid_argument("distill_loss_total: mask selects no pairs");
  }
  return total / static_cast<double>(selected);
}

double total_loss(double l_gt, double l_p, double l_r, double lambda,
                  double mu) {
  if (!std::isfinite(l_gt) || !std::isfinite(l_p) || !std::isfinite(l_r)) {
    throw std::invalid_argument("total_loss: non-finite term");
  }
  return l_gt + lambda * l_p + mu * l_r;
}

}  // namespace bitdet
