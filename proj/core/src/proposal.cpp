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

#include "bitdet/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bitdet/serialize.hpp"

namespace bitdet {
namespace {

// One bilinear tap along a single axis: blend source cells i0 and i1 with
// weight (1 - f) and f.
struct Tap {
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  double f = 0.0;
};

// Taps for resampling `extent` source cells starting at `origin` onto
// `patch` output cells, clamped to [0, size - 1].
std::vector<Tap> make_taps(double origin, double extent, std::size_t patch,
                           std::size_t size) {
  std::vector<Tap> taps(patch);
  for (std::size_t j = 0; j < patch; ++j) {
    double s = origin + (static_cast<double>(j) + 0.5) * extent /
                            static_cast<double>(patch) -
               0.5;
    s = std::clamp(s, 0.0, static_cast<double>(size - 1));
    const std::size_t i0 =
        std::min(static_cast<std::size_t>(s), size - 1);
    taps[j].i0 = i0;
    taps[j].i1 = std::min(i0 + 1, size - 1);
    taps[j].f = s - static_cast<double>(i0);
  }
  return taps;
}

void check_patch_rank3(const Tensor& patch, const char* who) {
  if (patch.rank() != 3) {
    throw std::invalid_argument(std::string(who) + ": expected rank 3, got " +
                                shape_to_string(patch.shape()));
  }
}

}  // namespace

Region clip_region(const Region& r, std::size_t feat_w, std::size_t feat_h) {
  const double x0 = std::clamp(r.x, 0.0, static_cast<double>(feat_w));
  const double y0 = std::clamp(r.y, 0.0, static_cast<double>(feat_h));
  const double x1 = std::clamp(r.x + r.w, 0.0, static_cast<double>(feat_w));
  const double y1 = std::clamp(r.y + r.h, 0.0, static_cast<double>(feat_h));
  if (!(x1 > x0) || !(y1 > y0)) {
    std::ostringstream os;
    os << "clip_region: region (" << r.x << ", " << r.y << ", " << r.w << ", "
       << r.h << ") is degenerate after clipping to " << feat_w << "x"
       << feat_h;
    throw std::invalid_argument(os.str());
  }
  return Region{x0, y0, x1 - x0, y1 - y0};
}

Tensor crop_resize(const Tensor& feature, const Region& region,
                   std::size_t patch) {
  check_patch_rank3(feature, "crop_resize");
  if (patch == 0) {
    throw std::invalid_argument("crop_resize: patch extent must be nonzero");
  }
  const std::size_t c = feature.dim(0);
  const std::size_t h = feature.dim(1);
  const std::size_t w = feature.dim(2);
  const std::vector<Tap> ty = make_taps(region.y, region.h, patch, h);
  const std::vector<Tap> tx = make_taps(region.x, region.w, patch, w);

  Tensor out({c, patch, patch});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t py = 0; py < patch; ++py) {
      const Tap& a = ty[py];
      for (std::size_t px = 0; px < patch; ++px) {
        const Tap& b = tx[px];
        const double v00 = feature.at(ch, a.i0, b.i0);
        const double v01 = feature.at(ch, a.i0, b.i1);
        const double v10 = feature.at(ch, a.i1, b.i0);
        const double v11 = feature.at(ch, a.i1, b.i1);
        const double top = v00 + (v01 - v00) * b.f;
        const double bot = v10 + (v11 - v10) * b.f;
        out.at(ch, py, px) = top + (bot - top) * a.f;
      }
    }
  }
  return out;
}

Tensor crop_resize_backward(const std::vector<std::size_t>& feature_shape,
                            const Region& region, std::size_t patch,
                            const Tensor& upstream) {
  if (feature_shape.size() != 3) {
    throw std::invalid_argument(
        "crop_resize_backward: feature shape must be rank 3");
  }
  check_patch_rank3(upstream, "crop_resize_backward");
  if (upstream.dim(1) != patch || upstream.dim(2) != patch ||
      upstream.dim(0) != feature_shape[0]) {
    throw std::invalid_argument(
        "crop_resize_backward: upstream " + shape_to_string(upstream.shape()) +
        " does not match patch " + std::to_string(patch) + " and feature " +
        shape_to_string(feature_shape));
  }
  const std::size_t c = feature_shape[0];
  const std::size_t h = feature_shape[1];
  const std::size_t w = feature_shape[2];
  const std::vector<Tap> ty = make_taps(region.y, region.h, patch, h);
  const std::vector<Tap> tx = make_taps(region.x, region.w, patch, w);

  Tensor grad({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t py = 0; py < patch; ++py) {
      const Tap& a = ty[py];
      for (std::size_t px = 0; px < patch; ++px) {
        const Tap& b = tx[px];
        const double g = upstream.at(ch, py, px);
        grad.at(ch, a.i0, b.i0) += g * (1.0 - a.f) * (1.0 - b.f);
        grad.at(ch, a.i0, b.i1) += g * (1.0 - a.f) * b.f;
        grad.at(ch, a.i1, b.i0) += g * a.f * (1.0 - b.f);
        grad.at(ch, a.i1, b.i1) += g * a.f * b.f;
      }
    }
  }
  return grad;
}

Tensor channel_transform(const Tensor& patch, double temperature) {
  check_patch_rank3(patch, "channel_transform");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("channel_transform: temperature must be > 0");
  }
  patch.check_finite("channel_transform input");
  const std::size_t c = patch.dim(0);
  const std::size_t per = patch.dim(1) * patch.dim(2);
  Tensor out(patch.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* v = patch.data() + ch * per;
    double* r = out.data() + ch * per;
    double vmax = v[0];
    for (std::size_t i = 1; i < per; ++i) vmax = std::max(vmax, v[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      r[i] = std::exp((v[i] - vmax) / temperature);
      denom += r[i];
    }
    for (std::size_t i = 0; i < per; ++i) r[i] /= denom;
  }
  return out;
}

Tensor channel_transform_backward(const Tensor& transformed,
                                  double temperature, const Tensor& upstream) {
  check_patch_rank3(transformed, "channel_transform_backward");
  if (!upstream.same_shape(transformed)) {
    throw std::invalid_argument(
        "channel_transform_backward: shape mismatch between " +
        shape_to_string(upstream.shape()) + " and " +
        shape_to_string(transformed.shape()));
  }
  const std::size_t c = transformed.dim(0);
  const std::size_t per = transformed.dim(1) * transformed.dim(2);
  Tensor grad(transformed.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* r = transformed.data() + ch * per;
    const double* u = upstream.data() + ch * per;
    double* g = grad.data() + ch * per;
    double dot = 0.0;
    for (std::size_t i = 0; i < per; ++i) dot += u[i] * r[i];
    for (std::size_t i = 0; i < per; ++i) {
      g[i] = r[i] * (u[i] - dot) / temperature;
    }
  }
  return grad;
}

ChannelStats channel_gaussian_stats(const Tensor& patch) {
  check_patch_rank3(patch, "channel_gaussian_stats");
  ChannelStats st;
  st.mean = channel_reduce(patch, ChannelStat::kMean);
  st.variance = channel_reduce(patch, ChannelStat::kVariance);
  return st;
}

std::string origin_to_string(ProposalOrigin o) {
  return o == ProposalOrigin::kTeacher ? "teacher" : "student";
}

ProposalOrigin origin_from_string(const std::string& s) {
  if (s == "teacher") return ProposalOrigin::kTeacher;
  if (s == "student") return ProposalOrigin::kStudent;
  throw std::invalid_argument("unknown proposal origin \"" + s + "\"");
}

std::vector<ProposalPair> build_pairs(
    const Tensor& teacher_feature, const Tensor& student_feature,
    const std::vector<Region>& teacher_regions,
    const std::vector<Region>& student_regions, std::size_t patch,
    double temperature) {
  check_patch_rank3(teacher_feature, "build_pairs teacher feature");
  check_patch_rank3(student_feature, "build_pairs student feature");
  if (!teacher_feature.same_shape(student_feature)) {
    throw std::invalid_argument(
        "build_pairs: feature shapes differ: " +
        shape_to_string(teacher_feature.shape()) + " vs " +
        shape_to_string(student_feature.shape()));
  }
  const std::size_t feat_h = teacher_feature.dim(1);
  const std::size_t feat_w = teacher_feature.dim(2);

  std::vector<ProposalPair> pairs;
  pairs.reserve(teacher_regions.size() + student_regions.size());
  auto add = [&](const Region& raw, ProposalOrigin origin) {
    ProposalPair p;
    p.pair_index = pairs.size();
    p.origin = origin;
    p.region = clip_region(raw, feat_w, feat_h);
    p.teacher_patch = crop_resize(teacher_feature, p.region, patch);
    p.student_patch = crop_resize(student_feature, p.region, patch);
    p.teacher_transformed = channel_transform(p.teacher_patch, temperature);
    p.student_transformed = channel_transform(p.student_patch, temperature);
    pairs.push_back(std::move(p));
  };
  for (const Region& r : teacher_regions) add(r, ProposalOrigin::kTeacher);
  for (const Region& r : student_regions) add(r, ProposalOrigin::kStudent);
  return pairs;
}

void write_pair_dump(const std::string& dir,
                     const std::vector<ProposalPair>& pairs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream csv(dir + "/proposals.csv");
  if (!csv) {
    throw std::runtime_error("write_pair_dump: cannot open " + dir +
                             "/proposals.csv");
  }
  csv << "pair_index,source,x,y,w,h\n";
  char name[64];
  for (const ProposalPair& p : pairs) {
    csv << p.pair_index << ',' << origin_to_string(p.origin);
    char coords[160];
    std::snprintf(coords, sizeof(coords), ",%.17g,%.17g,%.17g,%.17g\n",
                  p.region.x, p.region.y, p.region.w, p.region.h);
    csv << coords;
    std::snprintf(name, sizeof(name), "pair_%03zu_teacher.idat",
                  p.pair_index);
    save_tensor(dir + "/" + name, p.teacher_transformed);
    std::snprintf(name, sizeof(name), "pair_%03zu_student.idat",
                  p.pair_index);
    save_tensor(dir + "/" + name, p.student_transformed);
  }
  csv.close();
  if (!csv) throw std::runtime_error("write_pair_dump: write failed");
}

std::vector<ProposalPair> read_pair_dump(const std::string& dir) {
  std::ifstream csv(dir + "/proposals.csv");
  if (!csv) {
    throw std::runtime_error("read_pair_dump: cannot open " + dir +
                             "/proposals.csv");
  }
  std::string line;
  if (!std::getline(csv, line)) {
    throw std::runtime_error("read_pair_dump: empty proposals.csv");
  }
  std::vector<ProposalPair> pairs;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw std::runtime_error("read_pair_dump: malformed row \"" + line +
                               "\"");
    }
    ProposalPair p;
    p.pair_index = static_cast<std::size_t>(std::stoull(fields[0]));
    p.origin = origin_from_string(fields[1]);
    p.region = Region{std::stod(fields[2]), std::stod(fields[3]),
                      std::stod(fields[4]), std::stod(fields[5])};
    char name[64];
    std::snprintf(name, sizeof(name), "pair_%03zu_teacher.idat",
                  p.pair_index);
    p.teacher_transformed = load_tensor(dir + "/" + name);
    std::snprintf(name, sizeof(name), "pair_%03zu_student.idat",
                  p.pair_index);
    p.student_transformed = load_tensor(dir + "/" + name);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace bitdet
