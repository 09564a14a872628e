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
//
// Shared helpers for the test binaries: scratch directories, random
// fixtures, and a tiny process runner for CLI contract tests.

#ifndef BITDET_TESTS_TEST_UTIL_HPP_
#define BITDET_TESTS_TEST_UTIL_HPP_

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitdet/proposal.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"

namespace testutil {

// Scratch directory deleted when the fixture goes out of scope.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() /
                           "bitdet_test_XXXXXX")
                              .string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (mkdtemp(buf.data()) == nullptr) {
      throw std::runtime_error("mkdtemp failed");
    }
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

inline bitdet::Tensor random_tensor(bitdet::Rng& rng,
                                    const std::vector<std::size_t>& shape,
                                    double lo, double hi) {
  bitdet::Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline bitdet::Tensor random_normal_tensor(
    bitdet::Rng& rng, const std::vector<std::size_t>& shape, double scale) {
  bitdet::Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

// Builds a proposal pair whose transformed patches are genuine softmax
// outputs from correlated raw activations. Correlation keeps the
// per-channel covariance comfortably positive, away from the clamp, which
// matters for finite-difference probes of the analytic gradient.
inline bitdet::ProposalPair make_correlated_pair(bitdet::Rng& rng,
                                                 std::size_t channels,
                                                 std::size_t patch,
                                                 double temperature) {
  bitdet::Tensor raw_t({channels, patch, patch});
  bitdet::Tensor raw_s({channels, patch, patch});
  for (std::size_t i = 0; i < raw_t.size(); ++i) {
    const double base = 2.0 * rng.normal();
    raw_t[i] = base;
    raw_s[i] = base + 0.5 * rng.normal();
  }
  bitdet::ProposalPair pair;
  pair.pair_index = 0;
  pair.origin = bitdet::ProposalOrigin::kTeacher;
  pair.region = bitdet::Region{0.0, 0.0, static_cast<double>(patch),
                               static_cast<double>(patch)};
  pair.teacher_patch = raw_t;
  pair.student_patch = raw_s;
  pair.teacher_transformed = bitdet::channel_transform(raw_t, temperature);
  pair.student_transformed = bitdet::channel_transform(raw_s, temperature);
  return pair;
}

// Builds a pair with fully independent patches (covariance may clamp).
inline bitdet::ProposalPair make_independent_pair(bitdet::Rng& rng,
                                                  std::size_t channels,
                                                  std::size_t patch,
                                                  double temperature) {
  bitdet::Tensor raw_t = random_normal_tensor(rng, {channels, patch, patch},
                                              2.0);
  bitdet::Tensor raw_s = random_normal_tensor(rng, {channels, patch, patch},
                                              2.0);
  bitdet::ProposalPair pair;
  pair.pair_index = 0;
  pair.origin = bitdet::ProposalOrigin::kStudent;
  pair.region = bitdet::Region{0.0, 0.0, static_cast<double>(patch),
                               static_cast<double>(patch)};
  pair.teacher_patch = raw_t;
  pair.student_patch = raw_s;
  pair.teacher_transformed = bitdet::channel_transform(raw_t, temperature);
  pair.student_transformed = bitdet::channel_transform(raw_s, temperature);
  return pair;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Runs a shell command, capturing combined output and the exit code.
inline CommandResult run_command(const std::string& command) {
  CommandResult result;
  const std::string wrapped = command + " 2>&1";
  FILE* pipe = popen(wrapped.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  std::array<char, 4096> chunk;
  while (std::fgets(chunk.data(), static_cast<int>(chunk.size()), pipe) !=
         nullptr) {
    result.output += chunk.data();
  }
  const int status = pclose(pipe);
  if (status == -1) {
    result.exit_code = -1;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128;
  }
  return result;
}

}  // namespace testutil

#endif  // BITDET_TESTS_TEST_UTIL_HPP_
