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

#include "bitdet/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bitdet/rng.hpp"
#include "bitdet/serialize.hpp"

namespace bitdet {
namespace toy {
namespace {

constexpr double kBackgroundMax = 0.35;
constexpr double kColorMin = 0.55;
constexpr std::size_t kMinObjectSize = 14;
constexpr std::size_t kMaxObjectSize = 26;
constexpr std::size_t kPlacementAttempts = 30;
constexpr double kMaxPlacementIou = 0.3;

std::size_t center_cell(const Box& b) {
  const std::size_t cx = std::min<std::size_t>(
      static_cast<std::size_t>((b.x + b.w / 2.0) / kCellSize), kGridSize - 1);
  const std::size_t cy = std::min<std::size_t>(
      static_cast<std::size_t>((b.y + b.h / 2.0) / kCellSize), kGridSize - 1);
  return cy * kGridSize + cx;
}

// Shape membership test for a pixel (px, py) inside the object box.
bool pixel_in_shape(int cls, const Box& b, std::size_t px, std::size_t py) {
  const double fx = static_cast<double>(px) + 0.5 - b.x;  // in (0, w)
  const double fy = static_cast<double>(py) + 0.5 - b.y;
  switch (cls) {
    case 0:  // filled rectangle
      return true;
    case 1: {  // filled ellipse
      const double nx = 2.0 * fx / b.w - 1.0;
      const double ny = 2.0 * fy / b.h - 1.0;
      return nx * nx + ny * ny <= 1.0;
    }
    case 2: {  // hollow frame
      const double t = std::max(2.0, std::min(b.w, b.h) / 5.0);
      return fx < t || fx > b.w - t || fy < t || fy > b.h - t;
    }
    case 3: {  // cross
      const double t = std::max(2.0, std::min(b.w, b.h) / 4.0);
      return std::abs(fx - b.w / 2.0) <= t / 2.0 ||
             std::abs(fy - b.h / 2.0) <= t / 2.0;
    }
    case 4:  // triangle (right angle at the top-left corner)
      return fx / b.w + fy / b.h <= 1.0;
    default:
      throw std::logic_error("unknown shape class");
  }
}

void draw_object(Tensor& image, const Box& b, int cls, const double color[3]) {
  const std::size_t x0 = static_cast<std::size_t>(b.x);
  const std::size_t y0 = static_cast<std::size_t>(b.y);
  const std::size_t x1 = x0 + static_cast<std::size_t>(b.w);
  const std::size_t y1 = y0 + static_cast<std::size_t>(b.h);
  for (std::size_t py = y0; py < y1; ++py) {
    for (std::size_t px = x0; px < x1; ++px) {
      if (!pixel_in_shape(cls, b, px, py)) continue;
      for (std::size_t c = 0; c < kImageChannels; ++c) {
        image.at(c, py, px) = color[c];
      }
    }
  }
}

std::string cache_stem(const std::string& dir, std::uint64_t seed,
                       std::size_t count) {
  char name[80];
  std::snprintf(name, sizeof(name), "scenes_%016llx_n%zu",
                static_cast<unsigned long long>(seed), count);
  return dir + "/" + name;
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  const double ix0 = std::max(a.x, b.x);
  const double iy0 = std::max(a.y, b.y);
  const double ix1 = std::min(a.x + a.w, b.x + b.w);
  const double iy1 = std::min(a.y + a.h, b.y + b.h);
  const double iw = std::max(0.0, ix1 - ix0);
  const double ih = std::max(0.0, iy1 - iy0);
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Scene> gen_scenes(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<Scene> scenes;
  scenes.reserve(count);
  std::size_t class_counter = 0;

  for (std::size_t si = 0; si < count; ++si) {
    Scene scene;
    scene.image = Tensor({kImageChannels, kImageSize, kImageSize});
    for (std::size_t i = 0; i < scene.image.size(); ++i) {
      scene.image[i] = rng.uniform(0.0, kBackgroundMax);
    }

    const std::size_t n_objects = 1 + rng.uniform_index(4);
    for (std::size_t oi = 0; oi < n_objects; ++oi) {
      bool placed = false;
      for (std::size_t attempt = 0;
           attempt < kPlacementAttempts && !placed; ++attempt) {
        Box b;
        b.w = static_cast<double>(
            kMinObjectSize +
            rng.uniform_index(kMaxObjectSize - kMinObjectSize + 1));
        b.h = static_cast<double>(
            kMinObjectSize +
            rng.uniform_index(kMaxObjectSize - kMinObjectSize + 1));
        b.x = static_cast<double>(
            2 + rng.uniform_index(kImageSize - 3 -
                                  static_cast<std::size_t>(b.w) + 1));
        b.y = static_cast<double>(
            2 + rng.uniform_index(kImageSize - 3 -
                                  static_cast<std::size_t>(b.h) + 1));

        bool ok = true;
        for (const Box& other : scene.objects) {
          if (center_cell(b) == center_cell(other) ||
              box_iou(b, other) >= kMaxPlacementIou) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;

        b.cls = static_cast<int>(class_counter % kNumClasses);
        ++class_counter;
        double color[3];
        for (double& c : color) c = rng.uniform(kColorMin, 1.0);
        draw_object(scene.image, b, b.cls, color);
        scene.objects.push_back(b);
        placed = true;
      }
      // A crowded scene that cannot fit another object simply keeps fewer.
      if (!placed) break;
    }

    // Quantize so a save/load through the f32 tensor format is bit-exact.
    for (std::size_t i = 0; i < scene.image.size(); ++i) {
      scene.image[i] =
          static_cast<double>(static_cast<float>(scene.image[i]));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void save_scenes(const std::string& stem, const std::vector<Scene>& scenes) {
  if (scenes.empty()) {
    throw std::invalid_argument("save_scenes: empty scene list");
  }
  Tensor stacked({scenes.size(), kImageChannels, kImageSize, kImageSize});
  const std::size_t per = kImageChannels * kImageSize * kImageSize;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::copy(scenes[i].image.data(), scenes[i].image.data() + per,
              stacked.data() + i * per);
  }
  save_tensor(stem + ".idat", stacked);

  std::ofstream csv(stem + ".csv");
  if (!csv) throw std::runtime_error("save_scenes: cannot open " + stem +
                                     ".csv");
  csv << "scene_index,x,y,w,h,cls\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const Box& b : scenes[i].objects) {
      csv << i << ',' << static_cast<long long>(b.x) << ','
          << static_cast<long long>(b.y) << ',' << static_cast<long long>(b.w)
          << ',' << static_cast<long long>(b.h) << ',' << b.cls << '\n';
    }
  }
  csv.close();
  if (!csv) throw std::runtime_error("save_scenes: write failed");
}

std::vector<Scene> load_scenes(const std::string& stem) {
  Tensor stacked = load_tensor(stem + ".idat");
  if (stacked.rank() != 4 || stacked.dim(1) != kImageChannels ||
      stacked.dim(2) != kImageSize || stacked.dim(3) != kImageSize) {
    throw std::runtime_error("load_scenes: unexpected tensor shape " +
                             shape_to_string(stacked.shape()));
  }
  std::vector<Scene> scenes(stacked.dim(0));
  const std::size_t per = kImageChannels * kImageSize * kImageSize;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::vector<double> img(stacked.data() + i * per,
                            stacked.data() + (i + 1) * per);
    scenes[i].image =
        Tensor({kImageChannels, kImageSize, kImageSize}, std::move(img));
  }

  std::ifstream csv(stem + ".csv");
  if (!csv) throw std::runtime_error("load_scenes: cannot open " + stem +
                                     ".csv");
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw std::runtime_error("load_scenes: malformed row \"" + line + "\"");
    }
    const std::size_t idx = static_cast<std::size_t>(std::stoull(fields[0]));
    if (idx >= scenes.size()) {
      throw std::runtime_error("load_scenes: scene index out of range");
    }
    Box b;
    b.x = std::stod(fields[1]);
    b.y = std::stod(fields[2]);
    b.w = std::stod(fields[3]);
    b.h = std::stod(fields[4]);
    b.cls = std::stoi(fields[5]);
    scenes[idx].objects.push_back(b);
  }
  return scenes;
}

std::vector<Scene> load_or_generate(const std::string& cache_dir,
                                    std::uint64_t seed, std::size_t count) {
  if (cache_dir.empty()) return gen_scenes(seed, count);
  namespace fs = std::filesystem;
  const std::string stem = cache_stem(cache_dir, seed, count);
  if (fs::exists(stem + ".idat") && fs::exists(stem + ".csv")) {
    return load_scenes(stem);
  }
  std::vector<Scene> scenes = gen_scenes(seed, count);
  fs::create_directories(cache_dir);
  save_scenes(stem, scenes);
  return scenes;
}

bool scenes_equal(const std::vector<Scene>& a, const std::vector<Scene>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].image.same_shape(b[i].image) ||
        a[i].image.values() != b[i].image.values()) {
      return false;
    }
    if (a[i].objects.size() != b[i].objects.size()) return false;
    for (std::size_t j = 0; j < a[i].objects.size(); ++j) {
      const Box& p = a[i].objects[j];
      const Box& q = b[i].objects[j];
      if (p.x != q.x || p.y != q.y || p.w != q.w || p.h != q.h ||
          p.cls != q.cls) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace toy
}  // namespace bitdet
