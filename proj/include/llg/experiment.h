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

// Config-driven experiment runner and its CSV output.

#ifndef LLG_EXPERIMENT_H_
#define LLG_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "llg/attack.h"
#include "llg/defenses.h"
#include "llg/fl.h"
#include "llg/network.h"

namespace llg {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { kAsrVsBatchSize, kConvergenceSweep, kDefenseSweep, kCalibrationPlot };

std::string ExperimentKindName(ExperimentKind kind);
ExperimentKind ParseExperimentKind(const std::string& name);

enum class AttackKind { kLlg, kLlgStar, kLlgPlus, kRandom };

std::string AttackKindName(AttackKind kind);
AttackKind ParseAttackKind(const std::string& name);

struct ExperimentConfig {
  std::string name;  // catalog name, informational
  ExperimentKind kind = ExperimentKind::kAsrVsBatchSize;
  Algorithm algorithm = Algorithm::kFedSgd;
  int gamma = 10;
  std::vector<AttackKind> attacks = {AttackKind::kLlg, AttackKind::kLlgStar, AttackKind::kLlgPlus,
                                     AttackKind::kRandom};
  ModelKind model = ModelKind::kMlp;
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16, 32, 64, 128};
  Balance balance = Balance::kUnbalanced;
  // Every experiment runs once per entry; an empty list means no defense.
  std::vector<DefenseSpec> defenses;
  int trials = 100;
  uint64_t seed = 1;
  std::string output = "results.csv";
  DummyKind dummy = DummyKind::kZeros;
  ProbeSchedule probes;

  // Data. IDX files replace the synthetic data when both paths are set.
  size_t num_classes = 10;
  size_t input_dim = 64;
  size_t samples_per_class = 500;
  double spread = 0.3;
  std::string idx_images;
  std::string idx_labels;

  // Federated training (convergence sweeps and accuracy under defense).
  double learning_rate = 0.1;
  int rounds = 1000;
  int clients = 50;
  int clients_per_round = 10;
  // Attack every eval_every rounds (round 1 and the last round always).
  int eval_every = 1;
  // Victim batches attacked per evaluated round; the first one is the update
  // the victim actually shares.
  int victim_batches = 10;
  // Rounds of federated training under each defense before measuring model
  // accuracy in a defense sweep; 0 reports the attacked model's accuracy.
  int defense_train_rounds = 0;

  int workers = 1;

  // Throws ConfigError describing the first invalid field.
  void Validate() const;
};

// Parses the JSON config format. Unknown keys are rejected.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::string& path);
std::string ConfigToJson(const ExperimentConfig& config);

struct CatalogEntry {
  std::string name;
  std::string description;
  ExperimentConfig config;
};

// Built-in experiment presets.
const std::vector<CatalogEntry>& ExperimentCatalog();
const CatalogEntry& FindCatalogEntry(const std::string& name);

struct ResultRow {
  std::string experiment;
  std::string algorithm;
  std::string attack;
  std::string model;
  int batch_size = 0;
  std::string defense;
  int trial = 0;
  double asr = 0.0;
  double hellinger = 0.0;
  double model_accuracy = 0.0;
  uint64_t seed = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

// One (label, batch) observation of a calibration plot.
struct CalibrationPoint {
  int batch_size = 0;
  int trial = 0;
  Label label = 1;
  int count = 0;
  double gradient = 0.0;
  double calibrated = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CalibrationPoint> calibration;
};

// Runs the experiment described by config. Progress goes to `log` when it is
// non-null. Deterministic in config (including seed), whatever the worker
// count.
ExperimentResult RunExperiment(const ExperimentConfig& config, std::ostream* log = nullptr);

inline constexpr const char* kCsvHeader =
    "experiment,algorithm,attack,model,batch_size,defense,trial,asr,hellinger,model_accuracy,seed";

void EmitCsv(const std::vector<ResultRow>& rows, const std::string& path);
std::string FormatCsv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> ParseCsv(const std::string& text);

void EmitCalibrationCsv(const std::vector<CalibrationPoint>& points, const std::string& path);

struct CellSummary {
  std::string algorithm;
  std::string attack;
  std::string model;
  int batch_size = 0;
  std::string defense;
  int count = 0;
  double mean_asr = 0.0;
  double std_asr = 0.0;
  double mean_hellinger = 0.0;
  double mean_accuracy = 0.0;
};

// Mean and sample standard deviation of ASR per (algorithm, attack, model,
// batch size, defense) cell, in first-appearance order.
std::vector<CellSummary> Summarize(const std::vector<ResultRow>& rows);
void PrintSummary(const std::vector<CellSummary>& cells, std::ostream& out);

// Pearson correlation of calibrated gradient vs. count per batch size.
struct CalibrationSummary {
  int batch_size = 0;
  double raw_rho = 0.0;
  double calibrated_rho = 0.0;
  size_t points = 0;
};
std::vector<CalibrationSummary> SummarizeCalibration(const std::vector<CalibrationPoint>& points);

}  // namespace llg

#endif  // LLG_EXPERIMENT_H_
