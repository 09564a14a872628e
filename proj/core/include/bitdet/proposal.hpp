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

#ifndef BITDET_PROPOSAL_HPP_
#define BITDET_PROPOSAL_HPP_

#include <string>
#include <vector>

#include "bitdet/tensor.hpp"

namespace bitdet {

// Axis-aligned box in feature-map coordinates (not pixels).
struct Region {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// Intersects the region with the feature extent [0, w) x [0, h). Throws
// std::invalid_argument if the clipped region is degenerate (zero or
// negative area).
Region clip_region(const Region& r, std::size_t feat_w, std::size_t feat_h);

// Bilinearly resamples `region` of a (C, H, W) feature map onto a fixed
// (C, patch, patch) grid. Sample j of a row maps to source coordinate
// x + (j + 0.5) * w / patch - 0.5, clamped to the valid range, i.e. the
// half-pixel-center convention without corner alignment.
Tensor crop_resize(const Tensor& feature, const Region& region,
                   std::size_t patch);

// Gradient of crop_resize with respect to the feature map: scatters the
// upstream (C, patch, patch) gradient through the bilinear weights into a
// zero-initialized (C, H, W) tensor. feature_shape must be the original
// feature shape.
Tensor crop_resize_backward(const std::vector<std::size_t>& feature_shape,
                            const Region& region, std::size_t patch,
                            const Tensor& upstream);

// Per-channel spatial softmax with temperature: each channel of the
// (C, P, P) patch becomes exp((v - max) / T) normalized to sum 1 over its
// P*P cells. Temperature must be positive.
Tensor channel_transform(const Tensor& patch, double temperature);

// Gradient of channel_transform with respect to the raw patch values.
// `transformed` must be the forward output for `patch`.
Tensor channel_transform_backward(const Tensor& transformed,
                                  double temperature, const Tensor& upstream);

// Per-channel first and second moments of a (C, P, P) patch. Variance uses
// the population convention (divide by P*P).
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> variance;
};
ChannelStats channel_gaussian_stats(const Tensor& patch);

// Which head proposed the region.
enum class ProposalOrigin { kTeacher, kStudent };
std::string origin_to_string(ProposalOrigin o);
ProposalOrigin origin_from_string(const std::string& s);

// One region cropped from both feature maps. The raw patches keep the
// feature values; the transformed patches are the softmax form every
// discrepancy and loss downstream consumes.
struct ProposalPair {
  std::size_t pair_index = 0;
  ProposalOrigin origin = ProposalOrigin::kTeacher;
  Region region;
  Tensor teacher_patch;
  Tensor student_patch;
  Tensor teacher_transformed;
  Tensor student_transformed;
};

// Builds the union of teacher- and student-proposed regions: every region
// is cropped from BOTH feature maps so each pair compares the two networks
// on the same support. Teacher-proposed pairs come first, in their given
// order, then student-proposed; pair_index follows that ordering. Regions
// are clipped to the feature extent. Feature maps must share one shape.
std::vector<ProposalPair> build_pairs(const Tensor& teacher_feature,
                                      const Tensor& student_feature,
                                      const std::vector<Region>& teacher_regions,
                                      const std::vector<Region>& student_regions,
                                      std::size_t patch, double temperature);

// On-disk dump of a pair list: `<dir>/proposals.csv` with one row
// "pair_index,source,x,y,w,h" per pair plus the transformed patches as
// tensor files pair_NNN_teacher.idat / pair_NNN_student.idat. Reading
// restores regions and transformed patches (raw patches are not stored).
void write_pair_dump(const std::string& dir,
                     const std::vector<ProposalPair>& pairs);
std::vector<ProposalPair> read_pair_dump(const std::string& dir);

}  // namespace bitdet

#endif  // BITDET_PROPOSAL_HPP_
