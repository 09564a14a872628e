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

#include "bitdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bitdet/discrepancy.hpp"
#include "bitdet/distill.hpp"
#include "bitdet/rng.hpp"

namespace bitdet {
namespace toy {
namespace {

// Stream roles: deriving one seed per purpose keeps the streams
// independent, so e.g. the teacher consuming more draws can never shift
// the student's initialization.
enum StreamRole : std::uint64_t {
  kRoleTrainData = 1,
  kRoleEvalData = 2,
  kRoleTeacherInit = 3,
  kRoleTeacherTrain = 4,
  kRoleStudentInit = 5,
  kRoleStudentTrain = 6,
};

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Detection loss against ground truth and its gradients at the three head
// outputs: weighted binary cross-entropy on objectness over all cells,
// softmax cross-entropy on the class logits at object cells, and smooth-L1
// on the box offsets at object cells.
struct SceneLoss {
  double l_gt = 0.0;
  Tensor g_obj, g_cls, g_box;
};

SceneLoss detection_loss(const DetectorOutput& out, const Scene& scene,
                         double pos_weight) {
  SceneLoss r;
  r.g_obj = Tensor(out.obj.shape());
  r.g_cls = Tensor(out.cls.shape());
  r.g_box = Tensor(out.box.shape());

  const std::vector<CellTarget> targets = encode_targets(scene);
  const std::size_t cells = kGridSize * kGridSize;
  std::vector<std::uint8_t> positive(cells, 0);
  for (const CellTarget& t : targets) positive[t.cy * kGridSize + t.cx] = 1;

  double obj_loss = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double z = out.obj[i];
    if (positive[i]) {
      obj_loss += pos_weight * stable_softplus(-z);
      r.g_obj[i] = -pos_weight * sigmoid(-z);
    } else {
      obj_loss += stable_softplus(z);
      r.g_obj[i] = sigmoid(z);
    }
  }
  obj_loss /= static_cast<double>(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    r.g_obj[i] /= static_cast<double>(cells);
  }

  const double inv_n = 1.0 / static_cast<double>(targets.size());
  double cls_loss = 0.0;
  double box_loss = 0.0;
  for (const CellTarget& t : targets) {
    // Class cross-entropy with a max-shifted softmax.
    double zmax = out.cls.at(0, t.cy, t.cx);
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      zmax = std::max(zmax, out.cls.at(c, t.cy, t.cx));
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      denom += std::exp(out.cls.at(c, t.cy, t.cx) - zmax);
    }
    cls_loss += -(out.cls.at(static_cast<std::size_t>(t.cls), t.cy, t.cx) -
                  zmax - std::log(denom));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double p = std::exp(out.cls.at(c, t.cy, t.cx) - zmax) / denom;
      const double onehot = (static_cast<int>(c) == t.cls) ? 1.0 : 0.0;
      r.g_cls.at(c, t.cy, t.cx) += (p - onehot) * inv_n;
    }

    // Smooth-L1 box regression.
    for (std::size_t f = 0; f < kBoxFields; ++f) {
      const double d = out.box.at(f, t.cy, t.cx) - t.t[f];
      box_loss += std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
      r.g_box.at(f, t.cy, t.cx) += std::clamp(d, -1.0, 1.0) * inv_n;
    }
  }
  cls_loss *= inv_n;
  box_loss *= inv_n;

  r.l_gt = obj_loss + cls_loss + box_loss;
  return r;
}

// Builds the proposal pairs for one scene, applies the mode's selection
// rule, and accumulates lambda * d(L_P)/d(student neck) into *g_neck.
// Returns the scene's proposal distillation loss.
double distill_scene(const DistillConfig& cfg, TrainMode mode,
                     const Tensor& teacher_neck, const Tensor& teacher_obj,
                     const DetectorOutput& student_out, const Scene& scene,
                     Rng* rng, Tensor* g_neck) {
  const std::vector<Region> teacher_regions = propose(teacher_obj, cfg.n_props);
  const std::vector<Region> student_regions =
      propose(student_out.obj, cfg.n_props);

  std::vector<ProposalPair> pairs =
      build_pairs(teacher_neck, student_out.neck, teacher_regions,
                  student_regions, cfg.patch, cfg.temperature);

  std::vector<std::uint8_t> mask;
  if (mode == TrainMode::kGtRegion) {
    // Foreground-guided baseline: keep the pairs whose regions overlap a
    // ground-truth box (in feature coordinates). A scene whose proposals
    // all miss the objects contributes no distillation term.
    mask.assign(pairs.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Region& r = pairs[i].region;
      for (const Box& b : scene.objects) {
        const double bx = b.x / kCellSize, by = b.y / kCellSize;
        const double bw = b.w / kCellSize, bh = b.h / kCellSize;
        const double ix = std::min(r.x + r.w, bx + bw) - std::max(r.x, bx);
        const double iy = std::min(r.y + r.h, by + bh) - std::max(r.y, by);
        if (ix > 0.0 && iy > 0.0) {
          mask[i] = 1;
          any = true;
          break;
        }
      }
    }
    if (!any) return 0.0;
  } else if (mode == TrainMode::kRandom) {
    const std::size_t k = selection_count(pairs.size(), cfg.gamma);
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng->shuffle(idx);
    mask.assign(pairs.size(), 0);
    for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = 1;
  } else {  // kIda
    std::vector<double> eps(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      eps[i] = mahalanobis_discrepancy(pairs[i]);
    }
    mask = select_mask(eps, cfg.gamma);
  }

  const double l_p = distill_loss_total(pairs, mask);
  const std::size_t k =
      static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  const double upstream_scale = cfg.lambda / static_cast<double>(k);
  // Covariance-clamped channels make the loss gradient numerically huge
  // (division by the clamp floor), and one such pair would otherwise own
  // the whole scene's update. Budget the gradient per pair: each selected
  // pair may contribute at most distill_clip / k, so the scene total stays
  // within distill_clip and the *set* of selected pairs — not just its
  // most explosive member — shapes the direction.
  const double pair_cap =
      cfg.distill_clip > 0.0 ? cfg.distill_clip / static_cast<double>(k)
                             : 0.0;
  Tensor g_dist(student_out.neck.shape());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!mask[i]) continue;
    Tensor g_rs = entropy_loss_grad(pairs[i]);
    for (std::size_t j = 0; j < g_rs.size(); ++j) g_rs[j] *= upstream_scale;
    const Tensor g_patch = channel_transform_backward(
        pairs[i].student_transformed, cfg.temperature, g_rs);
    Tensor g_feat = crop_resize_backward(
        student_out.neck.shape(), pairs[i].region, cfg.patch, g_patch);
    if (pair_cap > 0.0) {
      double sq = 0.0;
      for (std::size_t j = 0; j < g_feat.size(); ++j) {
        sq += g_feat[j] * g_feat[j];
      }
      const double norm = std::sqrt(sq);
      if (norm > pair_cap) {
        const double scale = pair_cap / norm;
        for (std::size_t j = 0; j < g_feat.size(); ++j) g_feat[j] *= scale;
      }
    }
    for (std::size_t j = 0; j < g_dist.size(); ++j) {
      g_dist[j] += g_feat[j];
    }
  }
  for (std::size_t j = 0; j < g_neck->size(); ++j) {
    (*g_neck)[j] += g_dist[j];
  }
  return l_p;
}

struct EpochResult {
  double l_gt = 0.0;
  double l_p = 0.0;
  double l_r = 0.0;
  double total = 0.0;
};

// One pass over `order`; `teacher` is null while pretraining the teacher.
EpochResult train_one_epoch(ToyDetector* model,
                            const std::vector<Scene>& scenes,
                            const std::vector<std::size_t>& order,
                            const DistillConfig& cfg, TrainMode mode,
                            const TeacherBundle* teacher, double lr,
                            ModelGrads* velocity, Rng* rng,
                            std::size_t epoch_index) {
  EpochResult res;
  std::size_t n_batches = 0;

  for (std::size_t start = 0; start < order.size();
       start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    const double inv_b = 1.0 / static_cast<double>(end - start);

    ModelGrads batch_grads = model->make_grads();
    double batch_l_gt = 0.0, batch_l_p = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      const Scene& scene = scenes[order[i]];
      ForwardTrace trace;
      const DetectorOutput out = model->forward(scene.image, &trace);
      SceneLoss dl = detection_loss(out, scene, cfg.pos_weight);
      batch_l_gt += dl.l_gt;

      Tensor g_neck(out.neck.shape());
      const Tensor* g_neck_ptr = nullptr;
      if (mode != TrainMode::kNone && teacher != nullptr) {
        batch_l_p += distill_scene(cfg, mode, teacher->neck[order[i]],
                                   teacher->obj[order[i]], out, scene, rng,
                                   &g_neck);
        g_neck_ptr = &g_neck;
      }
      model->backward(trace, dl.g_obj, dl.g_cls, dl.g_box, g_neck_ptr,
                      &batch_grads);
    }
    scale_grads(&batch_grads, inv_b);
    model->add_reconstruction_grads(cfg.mu, &batch_grads);
    batch_l_gt *= inv_b;
    batch_l_p *= inv_b;
    const double l_r = model->reconstruction_penalty_sum();
    const double total =
        batch_l_gt + cfg.lambda * batch_l_p + cfg.mu * l_r;
    if (!std::isfinite(total)) {
      throw std::runtime_error(
          "training diverged: non-finite loss at epoch " +
          std::to_string(epoch_index) + ", batch " +
          std::to_string(n_batches));
    }

    model->sgd_step(batch_grads, lr, cfg.momentum, cfg.clip_norm, velocity);

    res.l_gt += batch_l_gt;
    res.l_p += batch_l_p;
    res.l_r += l_r;
    res.total += total;
    ++n_batches;
  }
  const double inv = 1.0 / static_cast<double>(n_batches);
  res.l_gt *= inv;
  res.l_p *= inv;
  res.l_r *= inv;
  res.total *= inv;
  return res;
}

}  // namespace

void DistillConfig::validate() const {
  if (train_scenes == 0 || eval_scenes == 0) {
    throw std::invalid_argument("config: scene counts must be positive");
  }
  if (teacher_epochs_max == 0) {
    throw std::invalid_argument("config: teacher_epochs_max must be positive");
  }
  // gate 0 means "accept the first epoch": handy for smoke runs
  if (!(teacher_gate >= 0.0) || !(teacher_gate <= 1.0)) {
    throw std::invalid_argument("config: teacher_gate must be in [0, 1]");
  }
  if (student_epochs < 2) {
    throw std::invalid_argument(
        "config: student_epochs must be at least 2 (two stages)");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("config: batch_size must be positive");
  }
  if (!(teacher_lr > 0.0)) {
    throw std::invalid_argument("config: teacher_lr must be positive");
  }
  if (!(lr > 0.0)) {
    throw std::invalid_argument("config: lr must be positive");
  }
  if (!(momentum >= 0.0) || momentum >= 1.0) {
    throw std::invalid_argument("config: momentum must be in [0, 1)");
  }
  if (!(lambda >= 0.0) || !(mu >= 0.0)) {
    throw std::invalid_argument("config: lambda and mu must be nonnegative");
  }
  if (!(gamma >= 0.0) || !(gamma <= 1.0)) {
    throw std::invalid_argument("config: gamma must be in [0, 1]");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("config: temperature must be positive");
  }
  if (n_props == 0) {
    throw std::invalid_argument("config: n_props must be positive");
  }
  if (patch < 2) {
    throw std::invalid_argument("config: patch must be at least 2");
  }
  if (!(pos_weight > 0.0)) {
    throw std::invalid_argument("config: pos_weight must be positive");
  }
  if (!(clip_norm >= 0.0)) {
    throw std::invalid_argument("config: clip_norm must be nonnegative");
  }
  if (!(distill_clip >= 0.0)) {
    throw std::invalid_argument("config: distill_clip must be nonnegative");
  }
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_echo(
    const DistillConfig& cfg) {
  return {
      {"seed", std::to_string(cfg.seed)},
      {"train_scenes", std::to_string(cfg.train_scenes)},
      {"eval_scenes", std::to_string(cfg.eval_scenes)},
      {"teacher_epochs_max", std::to_string(cfg.teacher_epochs_max)},
      {"teacher_gate", format_double(cfg.teacher_gate)},
      {"teacher_lr", format_double(cfg.teacher_lr)},
      {"student_epochs", std::to_string(cfg.student_epochs)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"lr", format_double(cfg.lr)},
      {"momentum", format_double(cfg.momentum)},
      {"lambda", format_double(cfg.lambda)},
      {"mu", format_double(cfg.mu)},
      {"gamma", format_double(cfg.gamma)},
      {"temperature", format_double(cfg.temperature)},
      {"n_props", std::to_string(cfg.n_props)},
      {"patch", std::to_string(cfg.patch)},
      {"pos_weight", format_double(cfg.pos_weight)},
      {"clip_norm", format_double(cfg.clip_norm)},
      {"distill_clip", format_double(cfg.distill_clip)},
      {"cache_dir", cfg.cache_dir},
  };
}

void apply_config_entry(DistillConfig* cfg, const std::string& key,
                        const std::string& value) {
  auto as_u64 = [&]() -> std::uint64_t {
    try {
      return std::stoull(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key \"" + key +
                                  "\": cannot parse \"" + value +
                                  "\" as an integer");
    }
  };
  auto as_size = [&]() { return static_cast<std::size_t>(as_u64()); };
  auto as_double = [&]() -> double {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key \"" + key +
                                  "\": cannot parse \"" + value +
                                  "\" as a number");
    }
  };
  if (key == "seed") cfg->seed = as_u64();
  else if (key == "train_scenes") cfg->train_scenes = as_size();
  else if (key == "eval_scenes") cfg->eval_scenes = as_size();
  else if (key == "teacher_epochs_max") cfg->teacher_epochs_max = as_size();
  else if (key == "teacher_gate") cfg->teacher_gate = as_double();
  else if (key == "teacher_lr") cfg->teacher_lr = as_double();
  else if (key == "student_epochs") cfg->student_epochs = as_size();
  else if (key == "batch_size") cfg->batch_size = as_size();
  else if (key == "lr") cfg->lr = as_double();
  else if (key == "momentum") cfg->momentum = as_double();
  else if (key == "lambda") cfg->lambda = as_double();
  else if (key == "mu") cfg->mu = as_double();
  else if (key == "gamma") cfg->gamma = as_double();
  else if (key == "temperature") cfg->temperature = as_double();
  else if (key == "n_props") cfg->n_props = as_size();
  else if (key == "patch") cfg->patch = as_size();
  else if (key == "pos_weight") cfg->pos_weight = as_double();
  else if (key == "clip_norm") cfg->clip_norm = as_double();
  else if (key == "distill_clip") cfg->distill_clip = as_double();
  else if (key == "cache_dir") cfg->cache_dir = value;
  else {
    throw std::invalid_argument("unknown config key \"" + key + "\"");
  }
}

DistillConfig parse_config(std::istream& is) {
  DistillConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    if (strip(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    apply_config_entry(&cfg, strip(line.substr(0, eq)),
                       strip(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

DistillConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::invalid_argument("config file not found: " + path);
  }
  return parse_config(is);
}

std::string mode_to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kNone: return "none";
    case TrainMode::kRandom: return "random";
    case TrainMode::kGtRegion: return "gt-region";
    case TrainMode::kIda: return "ida";
  }
  throw std::logic_error("bad TrainMode");
}

TrainMode mode_from_string(const std::string& s) {
  for (TrainMode m : kAllModes) {
    if (mode_to_string(m) == s) return m;
  }
  throw std::invalid_argument(
      "unknown mode \"" + s + "\" (expected none, random, gt-region, ida)");
}

bool reports_identical(const TrainReport& a, const TrainReport& b) {
  if (a.mode != b.mode || a.seed != b.seed ||
      a.teacher_epochs != b.teacher_epochs ||
      a.teacher_metric != b.teacher_metric ||
      a.final_metric != b.final_metric ||
      a.epochs.size() != b.epochs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const EpochStats& x = a.epochs[i];
    const EpochStats& y = b.epochs[i];
    if (x.l_gt != y.l_gt || x.l_p != y.l_p || x.l_r != y.l_r ||
        x.total != y.total || x.eval != y.eval) {
      return false;
    }
  }
  return true;
}

TeacherBundle pretrain_teacher(const DistillConfig& cfg,
                               const std::vector<Scene>& train_scenes,
                               const std::vector<Scene>& eval_scenes) {
  cfg.validate();
  TeacherBundle bundle;
  bundle.model = ToyDetector::init(derive_seed(cfg.seed, kRoleTeacherInit));
  bundle.model.set_stage(0);
  ModelGrads velocity = bundle.model.make_grads();
  Rng rng(derive_seed(cfg.seed, kRoleTeacherTrain));

  std::vector<std::size_t> order(train_scenes.size());
  std::iota(order.begin(), order.end(), 0);

  // Same decay shape as the student: a seed that has not cleared the gate
  // by 60% of its budget is usually oscillating around it, and smaller
  // steps settle the oscillation instead of riding it.
  const auto decay_at = [&cfg](double frac) {
    return static_cast<std::size_t>(std::floor(
        frac * static_cast<double>(cfg.teacher_epochs_max) + 0.5));
  };
  const std::size_t decay1 = decay_at(0.6);
  const std::size_t decay2 = decay_at(0.85);

  bool gate_met = false;
  for (std::size_t epoch = 0; epoch < cfg.teacher_epochs_max; ++epoch) {
    double lr = cfg.teacher_lr;
    if (epoch >= decay2) {
      lr *= 0.01;
    } else if (epoch >= decay1) {
      lr *= 0.1;
    }
    rng.shuffle(order);
    train_one_epoch(&bundle.model, train_scenes, order, cfg,
                    TrainMode::kNone, nullptr, lr, &velocity, &rng,
                    epoch);
    bundle.metric = evaluate(bundle.model, eval_scenes);
    bundle.epochs = epoch + 1;
    if (bundle.metric >= cfg.teacher_gate) {
      gate_met = true;
      break;
    }
  }
  if (!gate_met) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "teacher metric %.3f below the %.2f quality gate after "
                  "%zu epochs; retrain with more epochs or another seed",
                  bundle.metric, cfg.teacher_gate, bundle.epochs);
    throw std::runtime_error(msg);
  }

  bundle.neck.reserve(train_scenes.size());
  bundle.obj.reserve(train_scenes.size());
  for (const Scene& s : train_scenes) {
    DetectorOutput out = bundle.model.forward(s.image);
    bundle.neck.push_back(std::move(out.neck));
    bundle.obj.push_back(std::move(out.obj));
  }
  return bundle;
}

TrainReport train_student(const DistillConfig& cfg, TrainMode mode,
                          const TeacherBundle& teacher,
                          const std::vector<Scene>& train_scenes,
                          const std::vector<Scene>& eval_scenes) {
  cfg.validate();
  if (teacher.neck.size() != train_scenes.size()) {
    throw std::invalid_argument(
        "train_student: teacher cache does not cover the training scenes");
  }

  TrainReport report;
  report.mode = mode_to_string(mode);
  report.seed = cfg.seed;
  report.teacher_epochs = teacher.epochs;
  report.teacher_metric = teacher.metric;

  ToyDetector model = ToyDetector::init(derive_seed(cfg.seed,
                                                    kRoleStudentInit));
  model.set_stage(1);
  ModelGrads velocity = model.make_grads();
  Rng rng(derive_seed(cfg.seed, kRoleStudentTrain));

  const std::size_t epochs = cfg.student_epochs;
  const std::size_t stage2_start = epochs / 2;
  const auto decay_at = [epochs](double frac) {
    return static_cast<std::size_t>(
        std::floor(frac * static_cast<double>(epochs) + 0.5));
  };
  const std::size_t decay1 = decay_at(0.6);
  const std::size_t decay2 = decay_at(0.85);

  std::vector<std::size_t> order(train_scenes.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (epoch == stage2_start) model.set_stage(2);
    double lr = cfg.lr;
    if (epoch >= decay2) {
      lr *= 0.01;
    } else if (epoch >= decay1) {
      lr *= 0.1;
    }
    rng.shuffle(order);
    const EpochResult r =
        train_one_epoch(&model, train_scenes, order, cfg, mode, &teacher, lr,
                        &velocity, &rng, epoch);
    EpochStats stats;
    stats.l_gt = r.l_gt;
    stats.l_p = r.l_p;
    stats.l_r = r.l_r;
    stats.total = r.total;
    stats.eval = evaluate(model, eval_scenes);
    report.epochs.push_back(stats);
  }
  report.final_metric = report.epochs.back().eval;
  return report;
}

TrainReport run_training(const DistillConfig& cfg, TrainMode mode) {
  cfg.validate();
  const std::vector<Scene> train_scenes = load_or_generate(
      cfg.cache_dir, derive_seed(cfg.seed, kRoleTrainData), cfg.train_scenes);
  const std::vector<Scene> eval_scenes = load_or_generate(
      cfg.cache_dir, derive_seed(cfg.seed, kRoleEvalData), cfg.eval_scenes);
  const TeacherBundle teacher =
      pretrain_teacher(cfg, train_scenes, eval_scenes);
  return train_student(cfg, mode, teacher, train_scenes, eval_scenes);
}

std::vector<TrainReport> run_all_modes(const DistillConfig& cfg) {
  cfg.validate();
  const std::vector<Scene> train_scenes = load_or_generate(
      cfg.cache_dir, derive_seed(cfg.seed, kRoleTrainData), cfg.train_scenes);
  const std::vector<Scene> eval_scenes = load_or_generate(
      cfg.cache_dir, derive_seed(cfg.seed, kRoleEvalData), cfg.eval_scenes);
  const TeacherBundle teacher =
      pretrain_teacher(cfg, train_scenes, eval_scenes);
  std::vector<TrainReport> reports;
  for (TrainMode mode : kAllModes) {
    reports.push_back(
        train_student(cfg, mode, teacher, train_scenes, eval_scenes));
  }
  return reports;
}

void write_report_files(const std::string& dir, const TrainReport& report,
                        const DistillConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json j;
  j["mode"] = report.mode;
  j["seed"] = report.seed;
  j["teacher_epochs"] = report.teacher_epochs;
  j["teacher_metric"] = report.teacher_metric;
  j["final_metric"] = report.final_metric;
  nlohmann::json cfg_json = nlohmann::json::object();
  for (const auto& [k, v] : config_echo(cfg)) cfg_json[k] = v;
  j["config"] = cfg_json;
  j["epochs"] = nlohmann::json::array();
  for (const EpochStats& e : report.epochs) {
    j["epochs"].push_back({{"l_gt", e.l_gt},
                           {"l_p", e.l_p},
                           {"l_r", e.l_r},
                           {"total", e.total},
                           {"eval", e.eval}});
  }
  const std::string json_path = dir + "/report_" + report.mode + ".json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot open " + json_path);
  js << j.dump(2) << '\n';

  const std::string csv_path = dir + "/metrics_" + report.mode + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  csv << "epoch,l_gt,l_p,l_r,total,eval\n";
  char row[200];
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const EpochStats& e = report.epochs[i];
    std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  e.l_gt, e.l_p, e.l_r, e.total, e.eval);
    csv << row;
  }
}

}  // namespace toy
}  // namespace bitdet
