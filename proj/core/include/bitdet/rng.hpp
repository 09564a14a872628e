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

#ifndef BITDET_RNG_HPP_
#define BITDET_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bitdet {

// Deterministic random source. mt19937_64 is fully specified by the
// standard and the derived draws below avoid std::distributions (whose
// algorithms may differ between standard libraries), so a seed produces
// the same stream on every platform. Each helper consumes a documented
// number of raw engine words:
//
//   uniform()        1 word
//   uniform(a, b)    1 word
//   normal()         2 words
//   uniform_index(n) 1 word
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via the Box-Muller transform. No caching: every call
  // consumes exactly two engine words, keeping streams easy to reason
  // about.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n) by 128-bit multiply; bias is below 2^-64.
  std::size_t uniform_index(std::size_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::size_t>(wide >> 64);
  }

  // In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a role tag
// (splitmix64 finalizer). Roles keep e.g. data generation and weight
// initialization decoupled, so consuming more draws in one stream cannot
// shift another.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t role) {
  std::uint64_t z = base ^ (role * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace bitdet

#endif  // BITDET_RNG_HPP_
