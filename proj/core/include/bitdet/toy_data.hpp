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

#ifndef BITDET_TOY_DATA_HPP_
#define BITDET_TOY_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "bitdet/tensor.hpp"

namespace bitdet {
namespace toy {

inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kNumClasses = 5;
// One detection cell covers kCellSize x kCellSize pixels, giving a
// 16 x 16 grid of cells over the image.
inline constexpr std::size_t kCellSize = 4;
inline constexpr std::size_t kGridSize = kImageSize / kCellSize;

// Ground-truth object: pixel-aligned box (x, y are the top-left corner)
// and a shape class. Coordinates are stored as doubles but generation
// keeps them integral so text round-trips are exact.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  int cls = 0;
};

// Intersection-over-union of two boxes.
double box_iou(const Box& a, const Box& b);

struct Scene {
  Tensor image;  // (3, 64, 64), values in [0, 1], quantized to f32
  std::vector<Box> objects;
};

// Deterministic synthetic detection scenes: a noise background with one to
// four bright geometric shapes (the five classes are filled rectangle,
// ellipse, hollow frame, cross, and triangle). Class labels follow a
// global round-robin so the dataset's class histogram is balanced by
// construction. Object centers land in distinct grid cells and boxes
// overlap at most lightly, so every object has an unambiguous target cell.
// Images are quantized to f32 before return, which makes the tensor-file
// cache round-trip bit-exact.
std::vector<Scene> gen_scenes(std::uint64_t seed, std::size_t count);

// Scene cache: <stem>.idat holds the stacked images, <stem>.csv one row
// "scene_index,x,y,w,h,cls" per object.
void save_scenes(const std::string& stem, const std::vector<Scene>& scenes);
std::vector<Scene> load_scenes(const std::string& stem);

// Returns cached scenes when `cache_dir` is nonempty and a cache for this
// (seed, count) exists; otherwise generates them (and populates the cache
// when a directory is given).
std::vector<Scene> load_or_generate(const std::string& cache_dir,
                                    std::uint64_t seed, std::size_t count);

// Bitwise equality of images and exact equality of object lists.
bool scenes_equal(const std::vector<Scene>& a, const std::vector<Scene>& b);

}  // namespace toy
}  // namespace bitdet

#endif  // BITDET_TOY_DATA_HPP_
