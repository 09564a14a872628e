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

#ifndef BITDET_TRAIN_HPP_
#define BITDET_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bitdet/toy_data.hpp"
#include "bitdet/toy_model.hpp"

namespace bitdet {
namespace toy {

// Flat training configuration. Every field maps to one "key = value" line
// in a config file and one command-line override.
struct DistillConfig {
  std::uint64_t seed = 42;
  std::size_t train_scenes = 500;
  std::size_t eval_scenes = 100;
  std::size_t teacher_epochs_max = 30;
  double teacher_gate = 0.8;   // minimum teacher eval metric
  // Teacher pretraining step size. The full-precision teacher tolerates —
  // and on some data draws needs — a larger step than the 1-bit student
  // to clear the quality gate within its epoch budget.
  double teacher_lr = 0.02;
  std::size_t student_epochs = 12;  // stage 2 starts halfway
  std::size_t batch_size = 8;
  double lr = 0.01;
  double momentum = 0.9;
  double lambda = 0.4;       // weight of the proposal distillation loss
  double mu = 1e-4;          // weight of the reconstruction penalty
  double gamma = 0.6;        // fraction of proposal pairs kept
  double temperature = 4.0;  // softmax temperature of the patch transform
  std::size_t n_props = 8;   // proposals per network
  std::size_t patch = 7;     // resampled patch extent
  double pos_weight = 4.0;   // objectness positive-cell weight
  double clip_norm = 10.0;   // global gradient clip (0 disables)
  // Per-pair L2 budget on the proposal-distillation gradient entering the
  // neck: each selected pair contributes at most distill_clip / k, so a
  // scene's distillation gradient stays within distill_clip total
  // (0 disables). The covariance-normalized loss is near-singular when
  // patches decorrelate, so one raw pair gradient can dwarf the detection
  // gradient by orders of magnitude; capping per pair both protects the
  // detection signal from the global clip and keeps the direction shaped
  // by the whole selected set rather than its single largest member.
  double distill_clip = 1.0;
  std::string cache_dir;     // scene cache directory ("" = no cache)

  // Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

// Ordered key/value view of a config, as echoed by the CLI and written
// into reports.
std::vector<std::pair<std::string, std::string>> config_echo(
    const DistillConfig& cfg);

// Sets one field by key. Unknown keys and unparsable values throw
// std::invalid_argument naming the key.
void apply_config_entry(DistillConfig* cfg, const std::string& key,
                        const std::string& value);

// Parses "key = value" lines; '#' starts a comment.
DistillConfig parse_config(std::istream& is);

// Loads a config file; a missing file throws naming the path.
DistillConfig load_config_file(const std::string& path);

// How proposal distillation picks its regions each step.
enum class TrainMode {
  kNone,      // no distillation, detection loss only
  kRandom,    // same proposal pairs, random subset instead of ranked
  kGtRegion,  // distill on the ground-truth boxes, no selection
  kIda,       // discrepancy-ranked selection of proposal pairs
};
std::string mode_to_string(TrainMode mode);
TrainMode mode_from_string(const std::string& s);
inline constexpr TrainMode kAllModes[] = {TrainMode::kNone, TrainMode::kRandom,
                                          TrainMode::kGtRegion,
                                          TrainMode::kIda};

struct EpochStats {
  double l_gt = 0.0;
  double l_p = 0.0;
  double l_r = 0.0;
  double total = 0.0;
  double eval = 0.0;
};

struct TrainReport {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t teacher_epochs = 0;
  double teacher_metric = 0.0;
  std::vector<EpochStats> epochs;
  double final_metric = 0.0;
};

// Exact (bitwise) equality of every recorded number.
bool reports_identical(const TrainReport& a, const TrainReport& b);

// A trained teacher plus its frozen responses on the training scenes.
struct TeacherBundle {
  ToyDetector model;
  double metric = 0.0;
  std::size_t epochs = 0;
  std::vector<Tensor> neck;  // per training scene
  std::vector<Tensor> obj;
};

// Trains the real-valued teacher until it clears cfg.teacher_gate on the
// evaluation scenes (at most teacher_epochs_max epochs; throws if the gate
// is never met) and caches its outputs on the training scenes.
TeacherBundle pretrain_teacher(const DistillConfig& cfg,
                               const std::vector<Scene>& train_scenes,
                               const std::vector<Scene>& eval_scenes);

// Trains a 1-bit student against the frozen teacher. Stage 1 (first half
// of the epochs) binarizes the backbone blocks; stage 2 also binarizes the
// neck. The learning rate decays by 10x at 60% and again at 85% of the
// epochs. Identical seeds and config give bitwise identical reports.
TrainReport train_student(const DistillConfig& cfg, TrainMode mode,
                          const TeacherBundle& teacher,
                          const std::vector<Scene>& train_scenes,
                          const std::vector<Scene>& eval_scenes);

// Data generation + teacher + student in one call.
TrainReport run_training(const DistillConfig& cfg, TrainMode mode);

// Runs every mode with one shared dataset and teacher (the per-mode
// results are identical to separate run_training calls).
std::vector<TrainReport> run_all_modes(const DistillConfig& cfg);

// Writes <dir>/report_<mode>.json and <dir>/metrics_<mode>.csv.
void write_report_files(const std::string& dir, const TrainReport& report,
                        const DistillConfig& cfg);

}  // namespace toy
}  // namespace bitdet

#endif  // BITDET_TRAIN_HPP_
