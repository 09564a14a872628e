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
// bitdet command-line tool. One subcommand per experiment surface:
//
//   equiv-check  packed XNOR/popcount convolution vs the real reference
//   grad-check   analytic entropy-loss gradient vs finite differences
//   bench        OPs/memory accounting + wall times for layer specs
//   select-demo  proposal dump generation and discrepancy-based selection
//   train        teacher/student distillation runs on synthetic scenes
//   report       summary table over previously written training reports
//
// Exit codes: 0 success, 1 check or run failure, 2 usage/config error.
// Every randomized command derives all of its randomness from --seed
// (default 42) and prints the value it used.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitdet/binarize.hpp"
#include "bitdet/bitpack.hpp"
#include "bitdet/discrepancy.hpp"
#include "bitdet/distill.hpp"
#include "bitdet/proposal.hpp"
#include "bitdet/rng.hpp"
#include "bitdet/tensor.hpp"
#include "bitdet/train.hpp"

namespace {

using bitdet::BinaryTensor;
using bitdet::BitConvResult;
using bitdet::ConvSpec;
using bitdet::ProposalPair;
using bitdet::Region;
using bitdet::Rng;
using bitdet::SignTensor;
using bitdet::Tensor;

// ---------------------------------------------------------------------------
// equiv-check

// Draws a random but always-valid convolution geometry: odd kernels with
// padding at most (k-1)/2, and input extents solved from the output extents
// so the stride tiles the padded input exactly.
ConvSpec random_conv_spec(Rng* rng, std::size_t* in_h, std::size_t* in_w) {
  static constexpr std::size_t kKernels[] = {1, 3, 5};
  ConvSpec spec;
  spec.kernel = kKernels[rng->uniform_index(3)];
  spec.stride = 1 + rng->uniform_index(2);
  spec.padding = rng->uniform_index((spec.kernel - 1) / 2 + 1);
  spec.c_in = 1 + rng->uniform_index(96);
  spec.c_out = 1 + rng->uniform_index(8);
  const std::size_t out_h = 1 + rng->uniform_index(6);
  const std::size_t out_w = 1 + rng->uniform_index(6);
  *in_h = (out_h - 1) * spec.stride + spec.kernel - 2 * spec.padding;
  *in_w = (out_w - 1) * spec.stride + spec.kernel - 2 * spec.padding;
  return spec;
}

// Random ±1 tensor of the given shape.
Tensor random_signs(Rng* rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng->uniform() < 0.5 ? -1.0 : 1.0;
  }
  return t;
}

int cmd_equiv_check(std::size_t trials, std::uint64_t seed,
                    bool inject_fault) {
  std::printf("equiv-check: trials=%zu seed=%llu\n", trials,
              static_cast<unsigned long long>(seed));
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t in_h = 0, in_w = 0;
    const ConvSpec spec = random_conv_spec(&rng, &in_h, &in_w);
    const Tensor input = random_signs(&rng, {spec.c_in, in_h, in_w});
    const Tensor weights =
        random_signs(&rng, {spec.c_out, spec.c_in, spec.kernel, spec.kernel});

    BinaryTensor packed_in = BinaryTensor::pack(bitdet::sign_binarize(input));
    BinaryTensor packed_w =
        BinaryTensor::pack(bitdet::sign_binarize(weights));
    if (inject_fault && t == trials / 2) {
      // Test fixture: flip one weight bit so the packed path disagrees
      // with the reference and the mismatch reporting is exercised.
      packed_w.row(0)[0] ^= 1ull;
    }
    const BitConvResult got =
        bitdet::xnor_popcount_conv_core(packed_in, packed_w, spec);

    // The reference zero-pads, the packed path pads with -1 (the only
    // padding a sign tensor can express), so pre-pad with -1 and run the
    // reference without padding.
    ConvSpec unpadded = spec;
    unpadded.padding = 0;
    const Tensor ref = bitdet::conv2d_ref(
        bitdet::pad_spatial(input, spec.padding, -1.0), weights, unpadded);

    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (ref[i] != static_cast<double>(got.core[i])) {
        const std::size_t per_c = got.out_h * got.out_w;
        std::printf(
            "FAIL trial %zu: c_in=%zu c_out=%zu k=%zu s=%zu p=%zu "
            "in=%zux%zu\n",
            t, spec.c_in, spec.c_out, spec.kernel, spec.stride, spec.padding,
            in_h, in_w);
        std::printf(
            "  first mismatch at flat index %zu (c=%zu, y=%zu, x=%zu): "
            "reference %.0f, packed %lld\n",
            i, i / per_c, (i % per_c) / got.out_w, i % got.out_w, ref[i],
            static_cast<long long>(got.core[i]));
        return 1;
      }
    }
  }
  std::printf("OK: %zu trials, packed core identical to reference\n", trials);
  return 0;
}

// ---------------------------------------------------------------------------
// grad-check

// Builds a transformed proposal pair whose teacher and student patches are
// correlated, keeping the covariance clear of its clamp so the finite
// difference probes a smooth neighborhood.
ProposalPair make_pair(Rng* rng, std::size_t channels, std::size_t patch,
                       double temperature) {
  ProposalPair pair;
  pair.region = Region{0.0, 0.0, static_cast<double>(patch),
                       static_cast<double>(patch)};
  Tensor teacher({channels, patch, patch});
  Tensor student({channels, patch, patch});
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = 2.0 * rng->normal();
    student[i] = teacher[i] + 0.5 * rng->normal();
  }
  pair.teacher_patch = teacher;
  pair.student_patch = student;
  pair.teacher_transformed = bitdet::channel_transform(teacher, temperature);
  pair.student_transformed = bitdet::channel_transform(student, temperature);
  return pair;
}

int cmd_grad_check(std::size_t pairs, std::size_t channels, std::size_t patch,
                   double h, double tolerance, std::uint64_t seed) {
  std::printf(
      "grad-check: pairs=%zu channels=%zu patch=%zu h=%g tolerance=%g "
      "seed=%llu\n",
      pairs, channels, patch, h, tolerance,
      static_cast<unsigned long long>(seed));
  Rng rng(seed);
  std::printf("%6s  %14s  %s\n", "pair", "max_rel_err", "status");
  double worst = 0.0;
  std::size_t failures = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    ProposalPair pair = make_pair(&rng, channels, patch, 4.0);
    const Tensor grad = bitdet::entropy_loss_grad(pair);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < pair.student_transformed.size(); ++i) {
      const double saved = pair.student_transformed[i];
      pair.student_transformed[i] = saved + h;
      const double up = bitdet::entropy_loss(pair);
      pair.student_transformed[i] = saved - h;
      const double down = bitdet::entropy_loss(pair);
      pair.student_transformed[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      // Near-zero gradients are compared absolutely: the relative error
      // of two tiny numbers is noise.
      if (std::abs(grad[i]) < 1e-12) {
        if (std::abs(fd - grad[i]) > 1e-10) max_rel = 1.0;
        continue;
      }
      const double rel = std::abs(fd - grad[i]) /
                         std::max(std::abs(grad[i]), 1e-10);
      max_rel = std::max(max_rel, rel);
    }
    const bool ok = max_rel < tolerance;
    failures += ok ? 0 : 1;
    worst = std::max(worst, max_rel);
    std::printf("%6zu  %14.6e  %s\n", p, max_rel, ok ? "pass" : "FAIL");
  }
  std::printf("worst max_rel_err %.6e over %zu pairs\n", worst, pairs);
  if (failures != 0) {
    std::printf("FAIL: %zu of %zu pairs exceeded tolerance %g\n", failures,
                pairs, tolerance);
    return 1;
  }
  std::printf("OK: all pairs within tolerance %g\n", tolerance);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

// One "c_in,c_out,kernel,stride,padding,in_h,in_w" line. '#' starts a
// comment; blank lines are skipped.
struct BenchSpec {
  ConvSpec spec;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
};

std::vector<BenchSpec> read_bench_specs(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::invalid_argument("cannot open spec file: " + path);
  }
  std::vector<BenchSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    BenchSpec b;
    if (!(ls >> b.spec.c_in >> b.spec.c_out >> b.spec.kernel >>
          b.spec.stride >> b.spec.padding >> b.in_h >> b.in_w)) {
      throw std::invalid_argument("spec file " + path + " line " +
                                  std::to_string(line_no) +
                                  ": expected 7 comma-separated integers");
    }
    b.spec.validate();
    specs.push_back(b);
  }
  if (specs.empty()) {
    throw std::invalid_argument("spec file " + path +
                                " contains no layer specs");
  }
  return specs;
}

std::uint64_t time_ns(const std::function<void()>& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() /
      reps);
}

int cmd_bench(const std::string& specs_path, std::uint64_t seed) {
  const std::vector<BenchSpec> specs = read_bench_specs(specs_path);
  Rng rng(seed);
  std::printf("%s\n", bitdet::bench_csv_header().c_str());
  for (const BenchSpec& b : specs) {
    const auto [out_h, out_w] = b.spec.output_dims(b.in_h, b.in_w);
    const bitdet::OpsReport ops = bitdet::count_ops(b.spec, out_h, out_w,
                                                    /*binary=*/true);
    const Tensor input = random_signs(&rng, {b.spec.c_in, b.in_h, b.in_w});
    const Tensor weights = random_signs(
        &rng, {b.spec.c_out, b.spec.c_in, b.spec.kernel, b.spec.kernel});
    const BinaryTensor packed_in =
        BinaryTensor::pack(bitdet::sign_binarize(input));
    const BinaryTensor packed_w =
        BinaryTensor::pack(bitdet::sign_binarize(weights));
    const bitdet::ScaleVector scales(
        std::vector<double>(b.spec.c_out, 1.0));

    ConvSpec unpadded = b.spec;
    unpadded.padding = 0;
    const Tensor padded = bitdet::pad_spatial(input, b.spec.padding, -1.0);

    const std::uint64_t ns_packed = time_ns(
        [&] { bitdet::xnor_popcount_conv(packed_in, packed_w, scales,
                                         b.spec); },
        3);
    const std::uint64_t ns_ref =
        time_ns([&] { bitdet::conv2d_ref(padded, weights, unpadded); }, 3);
    std::printf("%s\n", bitdet::bench_csv_row(b.spec, b.in_h, b.in_w, ops,
                                              ns_packed, ns_ref)
                            .c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// select-demo

// Synthesizes a deterministic proposal dump: two random feature maps and a
// handful of random regions cropped from both.
void generate_dump(const std::string& out_dir, std::size_t n_pairs,
                   std::uint64_t seed) {
  constexpr std::size_t kChannels = 6;
  constexpr std::size_t kFeat = 16;
  constexpr std::size_t kPatch = 7;
  Rng rng(seed);
  Tensor teacher({kChannels, kFeat, kFeat});
  Tensor student({kChannels, kFeat, kFeat});
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = rng.normal();
    student[i] = 0.5 * teacher[i] + 0.5 * rng.normal();
  }
  // Half the regions from each "network" keeps both origins represented.
  std::vector<Region> teacher_regions, student_regions;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    Region r;
    r.w = rng.uniform(3.0, 8.0);
    r.h = rng.uniform(3.0, 8.0);
    r.x = rng.uniform(0.0, kFeat - r.w);
    r.y = rng.uniform(0.0, kFeat - r.h);
    (i % 2 == 0 ? teacher_regions : student_regions).push_back(r);
  }
  const std::vector<ProposalPair> pairs = bitdet::build_pairs(
      teacher, student, teacher_regions, student_regions, kPatch, 4.0);
  bitdet::write_pair_dump(out_dir, pairs);
  std::printf("wrote %zu pairs to %s\n", pairs.size(), out_dir.c_str());
}

int run_selection(const std::string& dump_dir, double gamma,
                  const std::string& mask_out) {
  const std::vector<ProposalPair> pairs = bitdet::read_pair_dump(dump_dir);
  std::vector<double> eps(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    eps[i] = bitdet::mahalanobis_discrepancy(pairs[i]);
  }
  const std::vector<std::uint8_t> mask = bitdet::select_mask(eps, gamma);
  std::printf("%4s  %16s  %s\n", "n", "discrepancy", "selected");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::printf("%4zu  %16.10f  %s\n", i, eps[i], mask[i] ? "yes" : "no");
  }
  if (!mask_out.empty()) {
    std::ofstream os(mask_out);
    if (!os) throw std::runtime_error("cannot open " + mask_out);
    os << "pair_index,selected\n";
    for (std::size_t i = 0; i < mask.size(); ++i) {
      os << i << ',' << static_cast<int>(mask[i]) << '\n';
    }
    std::printf("mask written to %s\n", mask_out.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

void echo_config(const bitdet::toy::DistillConfig& cfg) {
  std::printf("effective config:\n");
  for (const auto& [key, value] : bitdet::toy::config_echo(cfg)) {
    std::printf("  %s = %s\n", key.c_str(), value.c_str());
  }
}

int cmd_train(const std::string& config_path, const std::string& mode_str,
              bool all_modes, const std::string& out_dir,
              const std::vector<std::string>& overrides, bool seed_given,
              std::uint64_t seed, const std::string& cache_dir) {
  bitdet::toy::DistillConfig cfg;
  if (!config_path.empty()) {
    cfg = bitdet::toy::load_config_file(config_path);
  }
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got \"" + kv +
                                  "\"");
    }
    bitdet::toy::apply_config_entry(&cfg, kv.substr(0, eq),
                                    kv.substr(eq + 1));
  }
  if (seed_given) cfg.seed = seed;
  if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
  cfg.validate();
  echo_config(cfg);

  if (all_modes) {
    const std::vector<bitdet::toy::TrainReport> reports =
        bitdet::toy::run_all_modes(cfg);
    for (const auto& rep : reports) {
      bitdet::toy::write_report_files(out_dir, rep, cfg);
    }
    std::printf("\n%-10s  %12s\n", "mode", "final_metric");
    for (const auto& rep : reports) {
      std::printf("%-10s  %12.6f\n", rep.mode.c_str(), rep.final_metric);
    }
    return 0;
  }

  const bitdet::toy::TrainMode mode = bitdet::toy::mode_from_string(mode_str);
  const bitdet::toy::TrainReport rep = bitdet::toy::run_training(cfg, mode);
  bitdet::toy::write_report_files(out_dir, rep, cfg);
  std::printf("mode=%s teacher_metric=%.6f final_metric=%.6f\n",
              rep.mode.c_str(), rep.teacher_metric, rep.final_metric);
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::vector<std::string>& dirs) {
  namespace fs = std::filesystem;
  // mode -> list of final metrics, in the canonical mode order.
  std::vector<std::string> mode_order;
  std::map<std::string, std::vector<double>> finals;
  for (const std::string& dir : dirs) {
    if (!fs::is_directory(dir)) {
      throw std::invalid_argument("not a directory: " + dir);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("report_", 0) == 0 &&
          entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
      std::ifstream is(p);
      nlohmann::json j;
      is >> j;
      const std::string mode = j.at("mode").get<std::string>();
      if (finals.find(mode) == finals.end()) mode_order.push_back(mode);
      finals[mode].push_back(j.at("final_metric").get<double>());
    }
  }
  if (finals.empty()) {
    throw std::invalid_argument("no report_*.json files found");
  }
  std::printf("%-10s  %5s  %12s  %s\n", "mode", "runs", "mean_metric",
              "finals");
  for (const std::string& mode : mode_order) {
    const std::vector<double>& v = finals[mode];
    double sum = 0.0;
    for (double x : v) sum += x;
    std::string list;
    for (double x : v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%.4f", list.empty() ? "" : " ", x);
      list += buf;
    }
    std::printf("%-10s  %5zu  %12.6f  %s\n", mode.c_str(), v.size(),
                sum / static_cast<double>(v.size()), list.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bitdet: 1-bit detector distillation toolkit"};
  app.require_subcommand(1);

  // equiv-check
  std::size_t eq_trials = 500;
  std::uint64_t eq_seed = 42;
  bool eq_fault = false;
  CLI::App* eq = app.add_subcommand(
      "equiv-check", "Packed convolution vs real reference, exact equality");
  eq->add_option("--trials", eq_trials, "Number of random layer trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eq->add_option("--seed", eq_seed, "RNG seed")->capture_default_str();
  eq->add_flag("--inject-fault", eq_fault,
               "Flip one packed weight bit (expects a mismatch; test "
               "fixture)");

  // grad-check
  std::size_t gc_pairs = 50, gc_channels = 8, gc_patch = 7;
  double gc_h = 1e-6, gc_tol = 1e-6;
  std::uint64_t gc_seed = 42;
  CLI::App* gc = app.add_subcommand(
      "grad-check", "Analytic loss gradient vs central finite differences");
  gc->add_option("--pairs", gc_pairs, "Number of random pairs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--channels", gc_channels, "Patch channels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--patch", gc_patch, "Patch extent")
      ->check(CLI::Range(std::size_t{2}, std::size_t{64}))
      ->capture_default_str();
  gc->add_option("--step", gc_h, "Finite difference step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Max allowed relative error")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();

  // bench
  std::string bench_specs;
  std::uint64_t bench_seed = 42;
  CLI::App* bench = app.add_subcommand(
      "bench", "OPs/memory accounting and wall times for layer specs");
  bench->add_option("--specs", bench_specs,
                    "CSV file: c_in,c_out,kernel,stride,padding,in_h,in_w")
      ->required();
  bench->add_option("--seed", bench_seed, "RNG seed")->capture_default_str();

  // select-demo
  bool sd_generate = false;
  std::string sd_out, sd_dump, sd_mask_out;
  std::size_t sd_pairs = 8;
  double sd_gamma = 0.6;
  std::uint64_t sd_seed = 42;
  CLI::App* sd = app.add_subcommand(
      "select-demo",
      "Generate a proposal dump or rank one by information discrepancy");
  sd->add_flag("--generate", sd_generate,
               "Write a synthetic dump to --out instead of reading one");
  sd->add_option("--out", sd_out, "Output directory for --generate");
  sd->add_option("--pairs", sd_pairs, "Pairs to generate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sd->add_option("--dump", sd_dump, "Existing dump directory to rank");
  sd->add_option("--gamma", sd_gamma, "Fraction of pairs to select")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sd->add_option("--mask-out", sd_mask_out, "Write the selection mask CSV");
  sd->add_option("--seed", sd_seed, "RNG seed")->capture_default_str();

  // train
  std::string tr_config, tr_mode = "ida", tr_out = ".", tr_cache;
  bool tr_all = false;
  std::vector<std::string> tr_set;
  std::uint64_t tr_seed = 0;
  CLI::App* tr = app.add_subcommand(
      "train", "Distill a 1-bit student on synthetic detection scenes");
  tr->add_option("--config", tr_config, "Key-value config file");
  tr->add_option("--mode", tr_mode, "none|random|gt-region|ida")
      ->capture_default_str();
  tr->add_flag("--all-modes", tr_all,
               "Train every mode against one shared teacher");
  tr->add_option("--out", tr_out, "Report output directory")
      ->capture_default_str();
  tr->add_option("--set", tr_set, "Config override key=value (repeatable)");
  CLI::Option* tr_seed_opt =
      tr->add_option("--seed", tr_seed, "Seed override (default from config)");
  tr->add_option("--cache-dir", tr_cache, "Scene cache directory override");

  // report
  std::vector<std::string> rp_dirs;
  CLI::App* rp = app.add_subcommand(
      "report", "Summarize report_*.json files from training runs");
  rp->add_option("dirs", rp_dirs, "Directories to scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (eq->parsed()) return cmd_equiv_check(eq_trials, eq_seed, eq_fault);
    if (gc->parsed()) {
      return cmd_grad_check(gc_pairs, gc_channels, gc_patch, gc_h, gc_tol,
                            gc_seed);
    }
    if (bench->parsed()) return cmd_bench(bench_specs, bench_seed);
    if (sd->parsed()) {
      if (sd_generate) {
        if (sd_out.empty()) {
          throw std::invalid_argument("--generate requires --out DIR");
        }
        std::printf("select-demo: seed=%llu\n",
                    static_cast<unsigned long long>(sd_seed));
        generate_dump(sd_out, sd_pairs, sd_seed);
        return 0;
      }
      if (sd_dump.empty()) {
        throw std::invalid_argument(
            "select-demo needs either --generate --out DIR or --dump DIR");
      }
      return run_selection(sd_dump, sd_gamma, sd_mask_out);
    }
    if (tr->parsed()) {
      return cmd_train(tr_config, tr_mode, tr_all, tr_out, tr_set,
                       tr_seed_opt->count() > 0, tr_seed, tr_cache);
    }
    if (rp->parsed()) return cmd_report(rp_dirs);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;  // unreachable: require_subcommand(1) guarantees one branch
}
