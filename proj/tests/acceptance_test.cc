/*
 * Copyright 2026 The LLG Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance suite: one PASS/FAIL line per criterion with the measured values
// and runtime. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "llg/attack.h"
#include "llg/data.h"
#include "llg/defenses.h"
#include "llg/experiment.h"
#include "llg/fl.h"
#include "llg/loss.h"
#include "test_support.h"

namespace llg {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fixed(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

std::string Scientific(double v) {
  std::ostringstream out;
  out.setf(std::ios::scientific);
  out.precision(2);
  out << v;
  return out.str();
}

using Means = std::map<std::tuple<std::string, std::string, std::string, int>, double>;

// Mean ASR keyed by (algorithm, defense, attack, batch size).
Means MeanAsr(const ExperimentConfig& config) {
  Means out;
  for (const CellSummary& c : Summarize(RunExperiment(config).rows)) {
    out[{c.algorithm, c.defense, c.attack, c.batch_size}] = c.mean_asr;
  }
  return out;
}

ExperimentConfig Preset(const std::string& name) { return FindCatalogEntry(name).config; }

const SyntheticData& Synthetic() {
  static const SyntheticData data = SynthGenerate(SyntheticSpec{});
  return data;
}

Batch DrawBatch(int batch_size, Rng& rng) {
  BatchSpec spec;
  spec.size = batch_size;
  return MakeBatch(Synthetic().train, spec, rng);
}

// 1. No negative g_i for an absent label.
Outcome PropertyOne() {
  const int sizes[] = {2, 8, 32, 128};
  int violations = 0, absent = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto seed = DeriveSeed(101, {static_cast<uint64_t>(t)});
    const ModelKind kind = t % 2 ? ModelKind::kCnn : ModelKind::kMlp;
    const Network net = MakeModel(kind, 64, 10, seed);
    Rng rng(seed);
    const Batch b = DrawBatch(sizes[t % 4], rng);
    const auto g = ComputeBatchGradients(net, b.inputs, b.labels).last_layer.g;
    for (size_t i = 0; i < g.size(); ++i) {
      if (b.truth.counts()[i] == 0) {
        ++absent;
        violations += g[i] < 0.0;
      }
    }
  }
  return {violations == 0, "1000 trials (MLP+CNN), " + std::to_string(absent) +
                               " absent labels, " + std::to_string(violations) + " negative"};
}

// 2. Every label from the negative-gradient step is present.
Outcome StepOneSoundness() {
  const int sizes[] = {1, 2, 4, 8, 16, 32, 64, 128};
  int violations = 0, emitted = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto seed = DeriveSeed(202, {static_cast<uint64_t>(t)});
    const ModelKind kind = t % 2 ? ModelKind::kCnn : ModelKind::kMlp;
    const Network net = MakeModel(kind, 64, 10, seed);
    Rng rng(seed);
    const Batch b = DrawBatch(sizes[t % 8], rng);
    const auto g = ComputeBatchGradients(net, b.inputs, b.labels).last_layer.g;
    const LabelMultiset step1 = NegativeGradientLabels(g);
    for (size_t i = 0; i < g.size(); ++i) {
      if (step1.counts()[i] == 0) continue;
      ++emitted;
      violations += b.truth.counts()[i] == 0;
    }
  }
  return {violations == 0, "1000 trials, " + std::to_string(emitted) + " step-1 labels, " +
                               std::to_string(violations) + " absent"};
}

// 3. Calibrated gradients track label counts.
Outcome Calibration() {
  const ExperimentResult r = RunExperiment(Preset("calibration"));
  bool pass = true;
  std::string detail = "|rho| calibrated (raw):";
  for (const auto& s : SummarizeCalibration(r.calibration)) {
    pass = pass && std::abs(s.calibrated_rho) > 0.95;
    detail += " B=" + std::to_string(s.batch_size) + " " + Fixed(std::abs(s.calibrated_rho), 4) +
              " (" + Fixed(std::abs(s.raw_rho), 4) + ")";
  }
  return {pass, detail};
}

// 4. LLG+ headline.
Outcome Headline() {
  ExperimentConfig c = Preset("asr_fedsgd");
  c.attacks = {AttackKind::kLlgPlus};
  Means m = MeanAsr(c);
  bool pass = true;
  std::string detail = "LLG+ mean ASR:";
  for (int b : c.batch_sizes) {
    const double v = m[{"fedsgd", "none", "llg_plus", b}];
    pass = pass && v >= 0.90;
    detail += " B=" + std::to_string(b) + " " + Fixed(v);
  }
  return {pass, detail};
}

// 5 and 6 share the B = 32 cells.
struct Batch32 {
  Means fedsgd, fedavg;
};
const Batch32& AtBatch32() {
  static const Batch32 cells = [] {
    Batch32 out;
    ExperimentConfig c = Preset("asr_fedsgd");
    c.batch_sizes = {32};
    out.fedsgd = MeanAsr(c);
    ExperimentConfig a = Preset("asr_fedavg");
    a.batch_sizes = {32};
    out.fedavg = MeanAsr(a);
    return out;
  }();
  return cells;
}

Outcome Ordering() {
  Means m = AtBatch32().fedsgd;
  const double plus = m[{"fedsgd", "none", "llg_plus", 32}];
  const double llg = m[{"fedsgd", "none", "llg", 32}];
  const double guess = m[{"fedsgd", "none", "random", 32}];
  return {plus - llg >= 0.05 && llg - guess >= 0.05,
          "B=32 LLG+ " + Fixed(plus) + ", LLG " + Fixed(llg) + ", random " + Fixed(guess)};
}

Outcome FedAvgDegradation() {
  Means sgd = AtBatch32().fedsgd, avg = AtBatch32().fedavg;
  const double guess = avg[{"fedavg", "none", "random", 32}];
  bool pass = true;
  std::string detail = "B=32 FedAvg(10) vs FedSGD:";
  for (const char* attack : {"llg", "llg_star", "llg_plus"}) {
    const double a = avg[{"fedavg", "none", attack, 32}];
    const double s = sgd[{"fedsgd", "none", attack, 32}];
    pass = pass && a < s && a - guess >= 0.05;
    detail += std::string(" ") + attack + " " + Fixed(a) + " vs " + Fixed(s) + ";";
  }
  detail += " FedAvg random " + Fixed(guess) + " (cells computed under [5])";
  return {pass, detail};
}

// 7. ASR of the victim's updates at the first and last round of training.
Outcome Convergence() {
  ExperimentConfig c = Preset("convergence_fedsgd");
  c.attacks = {AttackKind::kLlg, AttackKind::kRandom};
  c.eval_every = c.rounds - 1;
  c.victim_batches = 500;
  const ExperimentResult r = RunExperiment(c);
  std::map<std::pair<std::string, int>, ResultRow> rows;
  for (const auto& row : r.rows) rows[{row.attack, row.trial}] = row;
  const double first = rows[{"llg", 1}].asr;
  const double last = rows[{"llg", c.rounds}].asr;
  const double guess = rows[{"random", c.rounds}].asr;
  return {last < first && last > guess,
          "LLG round 1 " + Fixed(first) + ", round " + std::to_string(c.rounds) + " " +
              Fixed(last) + ", random " + Fixed(guess) + ", test accuracy " +
              Fixed(rows[{"llg", 1}].model_accuracy) + " -> " +
              Fixed(rows[{"llg", c.rounds}].model_accuracy)};
}

// 8. Threshold compression.
Outcome Compression() {
  ExperimentConfig c = Preset("defense_compression");
  c.defenses = {ParseDefense("none"), ParseDefense("compress:0.2"), ParseDefense("compress:0.8"),
                ParseDefense("compress_layer:0.8")};
  Means m = MeanAsr(c);
  bool kill = true, slight = true;
  std::string detail = "LLG+ / random:";
  for (int b : c.batch_sizes) {
    const double none = m[{"fedsgd", "none", "llg_plus", b}];
    const double light = m[{"fedsgd", "compress:0.2", "llg_plus", b}];
    const double heavy = m[{"fedsgd", "compress:0.8", "llg_plus", b}];
    const double guess = m[{"fedsgd", "compress:0.8", "random", b}];
    const double layer = m[{"fedsgd", "compress_layer:0.8", "llg_plus", b}];
    if (b >= 4) kill = kill && heavy < guess;
    slight = slight && std::abs(light - none) < 0.15;
    detail += " B=" + std::to_string(b) + " [0.8] " + Fixed(heavy) + "/" + Fixed(guess) +
              " [0.2] " + Fixed(light) + " [none] " + Fixed(none) + " [per-tensor 0.8] " +
              Fixed(layer) + ";";
  }
  detail += std::string(" theta=0.8 below random for B>=4: ") + (kill ? "yes" : "no") +
            ", theta=0.2 within 0.15: " + (slight ? "yes" : "no");
  return {kill && slight, detail};
}

// 9. Gaussian noise.
Outcome Noise() {
  ExperimentConfig c = Preset("defense_noise");
  c.defenses = {ParseDefense("none"), ParseDefense("noise:0.1")};
  c.batch_sizes = {2, 128};
  Means m = MeanAsr(c);
  const double clean2 = m[{"fedsgd", "none", "llg_plus", 2}];
  const double noisy2 = m[{"fedsgd", "noise:0.1", "llg_plus", 2}];
  const double noisy128 = m[{"fedsgd", "noise:0.1", "llg_plus", 128}];
  const double guess128 = m[{"fedsgd", "noise:0.1", "random", 128}];
  const bool reduced = noisy2 < clean2;
  const bool above = noisy128 > guess128;
  return {reduced && above, "B=2 LLG+ " + Fixed(clean2) + " -> " + Fixed(noisy2) +
                                (reduced ? " (reduced)" : " (not reduced)") + "; B=128 LLG+ " +
                                Fixed(noisy128) + " vs random " + Fixed(guess128)};
}

// 10. Finite differences, degenerate FedAvg and exact compression bookkeeping.
Outcome NumericalCore() {
  size_t fd_failed = 0, fd_checked = 0;
  double worst = 0.0;
  for (uint64_t s = 1; s <= 20; ++s) {
    const Network net = testing::RandomSmallNetwork(s);
    Rng rng(s);
    const Tensor x = testing::RandomInputs(net, 3, rng);
    const auto y = testing::RandomLabels(3, net.num_classes(), rng);
    const auto report = testing::CheckFiniteDifferences(net, x, y);
    fd_failed += report.failed;
    fd_checked += report.checked;
    worst = std::max(worst, report.worst);
  }

  int mismatched = 0;
  for (uint64_t s = 1; s <= 20; ++s) {
    const Network net = MakeModel(s % 2 ? ModelKind::kMlp : ModelKind::kCnn, 64, 10, s);
    BatchSpec spec;
    spec.size = static_cast<int>(1 + s * 3);
    spec.balance = s % 3 ? Balance::kUnbalanced : Balance::kBalanced;
    Rng r1(s), r2(s);
    const RoundUpdate avg = LocalTrainFedAvg(net, Synthetic().train, spec, 1, 0.1, r1);
    Network copy = net;
    const RoundUpdate sgd =
        LocalTrainFedSgd(copy, MakeBatch(Synthetic().train, spec, r2), 0.1, false);
    mismatched += !(avg.grads == sgd.grads && avg.last_layer.g == sgd.last_layer.g &&
                    avg.sample_count == sgd.sample_count && avg.truth == sgd.truth);
  }

  int broken_rounds = 0;
  Rng rng(7);
  std::uniform_int_distribution<int> units(-4096, 4096);
  for (ThresholdScope scope : {ThresholdScope::kGlobal, ThresholdScope::kPerTensor}) {
    CompressionState state(0.8, scope);
    Gradients fed, emitted;
    for (int round = 0; round < 50; ++round) {
      Gradients g;
      g.tensors = {Tensor({10, 64}), Tensor({10})};
      for (auto& t : g.tensors) {
        for (double& v : t.data()) v = units(rng) / 4096.0;
      }
      if (round == 0) {
        fed = g.ZerosLike();
        emitted = g.ZerosLike();
      }
      fed.Axpy(1.0, g);
      emitted.Axpy(1.0, state.Compress(g));
      Gradients sum = emitted;
      sum.Axpy(1.0, state.residual());
      broken_rounds += !(sum == fed);
    }
  }
  return {fd_failed == 0 && mismatched == 0 && broken_rounds == 0,
          "finite differences " + std::to_string(fd_checked - fd_failed) + "/" +
              std::to_string(fd_checked) + " within 1e-3 (worst " + Scientific(worst) +
              "); FedAvg(1) vs FedSGD mismatches " + std::to_string(mismatched) +
              "/20; conservation violations " + std::to_string(broken_rounds) + "/100 rounds"};
}

// 11. Byte-identical CSV for repeated runs.
Outcome Determinism() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("llg_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  int differing = 0, files = 0;
  for (const char* name : {"asr_fedsgd", "asr_fedavg", "defense_dp", "convergence_fedsgd"}) {
    ExperimentConfig c = Preset(name);
    c.trials = 5;
    c.rounds = std::min(c.rounds, 20);
    c.seed = 77;
    std::string first;
    for (int run = 0; run < 2; ++run) {
      c.workers = run + 1;
      const auto path = dir / (std::string(name) + std::to_string(run) + ".csv");
      EmitCsv(RunExperiment(c).rows, path.string());
      if (run == 0) {
        first = read(path);
      } else {
        ++files;
        differing += read(path) != first;
      }
    }
  }
  std::filesystem::remove_all(dir);
  return {differing == 0, std::to_string(files) + " experiments run twice (1 and 2 workers), " +
                              std::to_string(differing) + " differing CSV files"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace llg

int main() {
  using namespace llg;
  const std::vector<Criterion> criteria = {
      {1, "property-1 exactness", 60, PropertyOne},
      {2, "step-1 soundness", 60, StepOneSoundness},
      {3, "calibration correlation", 60, Calibration},
      {4, "LLG+ headline", 300, Headline},
      {5, "attack ordering", 120, Ordering},
      {6, "FedAvg degradation", 300, FedAvgDegradation},
      {7, "convergence decay", 600, Convergence},
      {8, "compression kill", 180, Compression},
      {9, "noise resilience", 180, Noise},
      {10, "numerical core", 60, NumericalCore},
      {11, "determinism", 60, Determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds <= c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": "
              << outcome.detail << " (" << Fixed(seconds, 1) << " s of " << c.budget_seconds
              << " s" << (in_budget ? "" : ", over budget") << ")" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " of " +
                                                           std::to_string(criteria.size()) +
                                                           " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
