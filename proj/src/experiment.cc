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

#include "llg/experiment.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "llg/data.h"
#include "llg/metrics.h"
#include "llg/parallel.h"
#include "llg/rng.h"

namespace llg {
namespace {

using Json = nlohmann::json;

// Stream tags keeping the derived seeds of different purposes apart.
constexpr uint64_t kTrialStream = 0x7121a1;
constexpr uint64_t kDefenseStream = 0xdefe45e;
constexpr uint64_t kAttackStream = 0xa77ac4;
constexpr uint64_t kDataStream = 0xda7a;
constexpr uint64_t kFederationStream = 0xfed;
constexpr uint64_t kVictimStream = 0x71c7;

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Config parsing.

template <typename T>
T Get(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("config field '" + key + "' has the wrong type: " + e.what());
  }
}

int GetInt(const Json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("config field '" + key + "' must be an integer");
  return Get<int>(j, key);
}

double GetDouble(const Json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config field '" + key + "' must be a number");
  return Get<double>(j, key);
}

std::string GetString(const Json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config field '" + key + "' must be a string");
  return Get<std::string>(j, key);
}

template <typename Fn>
auto Wrap(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

void ParseAlgorithmField(const std::string& text, ExperimentConfig& config) {
  const auto open = text.find('(');
  if (open == std::string::npos) {
    config.algorithm = ParseAlgorithm(text);
    return;
  }
  if (text.back() != ')') throw ConfigError("malformed algorithm '" + text + "'");
  config.algorithm = ParseAlgorithm(text.substr(0, open));
  if (config.algorithm != Algorithm::kFedAvg) {
    throw ConfigError("only fedavg takes a local step count, got '" + text + "'");
  }
  const std::string digits = text.substr(open + 1, text.size() - open - 2);
  int gamma = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), gamma);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw ConfigError("malformed local step count in '" + text + "'");
  }
  config.gamma = gamma;
}

// ---------------------------------------------------------------------------
// Data and attacks.

struct DataPools {
  ClientDataset train;
  ClientDataset test;
};

DataPools LoadData(const ExperimentConfig& config) {
  DataPools pools;
  if (!config.idx_images.empty()) {
    ClientDataset all = LoadIdx(config.idx_images, config.idx_labels);
    all.num_classes = config.num_classes;
    all.Validate();
    // Every fifth sample is held out for testing.
    for (size_t k = 0; k < all.samples.size(); ++k) {
      (k % 5 == 4 ? pools.test : pools.train).samples.push_back(std::move(all.samples[k]));
    }
    pools.train.num_classes = pools.test.num_classes = config.num_classes;
    if (pools.test.samples.empty()) pools.test = pools.train;
    return pools;
  }
  SyntheticSpec spec;
  spec.n_classes = config.num_classes;
  spec.input_dim = config.input_dim;
  spec.samples_per_class = config.samples_per_class;
  spec.spread = config.spread;
  spec.seed = DeriveSeed(config.seed, {kDataStream});
  SyntheticData data = SynthGenerate(spec);
  pools.train = std::move(data.train);
  pools.test = std::move(data.test);
  return pools;
}

// Parameters that depend only on the model, estimated once and reused for
// every observed update of that model.
std::optional<AttackParams> ProbeParams(AttackKind kind, const Network& shadow,
                                        const ExperimentConfig& config, int batch_size,
                                        const ClientDataset& aux, Rng& rng) {
  std::optional<AttackParams> params;
  if (kind == AttackKind::kLlgStar) {
    params = EstimateParamsWhiteBox(shadow, config.dummy, batch_size, batch_size, rng,
                                    config.probes);
  } else if (kind == AttackKind::kLlgPlus) {
    params = EstimateParamsAuxiliary(shadow, aux, batch_size, batch_size, rng, config.probes);
  }
  if (params && config.algorithm == Algorithm::kFedAvg) {
    params = ForAccumulatedUpdate(*params, config.gamma);
  }
  return params;
}

LabelMultiset Extract(AttackKind kind, const std::optional<AttackParams>& probed,
                      const LastLayerGradient& observed, Rng& rng) {
  switch (kind) {
    case AttackKind::kRandom:
      return RandomGuess(observed.num_classes(), observed.sample_count, rng);
    case AttackKind::kLlg: {
      AttackParams params;
      try {
        params = EstimateParamsShared(observed);
      } catch (const NoNegativeGradients&) {
        params = UniformParams(observed.num_classes(), observed.sample_count);
      }
      return LlgExtract(observed, params);
    }
    case AttackKind::kLlgStar:
    case AttackKind::kLlgPlus:
      return LlgExtract(observed, *probed);
  }
  throw Error("unknown attack kind");
}

// The victim's update as observed after its defense.
RoundUpdate VictimUpdate(const Network& model, const ExperimentConfig& config,
                         const ClientDataset& data, int batch_size, const DefenseSpec& defense,
                         Rng& batch_rng, Rng& defense_rng) {
  BatchSpec spec;
  spec.size = batch_size;
  spec.balance = config.balance;
  RoundUpdate update;
  if (config.algorithm == Algorithm::kFedSgd) {
    Network local = model;
    update = LocalTrainFedSgd(local, MakeBatch(data, spec, batch_rng), config.learning_rate,
                              /*train=*/false);
  } else {
    update = LocalTrainFedAvg(model, data, spec, config.gamma, config.learning_rate, batch_rng);
  }
  Defender defender(defense);
  update.grads = defender.Apply(update.grads, defense_rng);
  update.last_layer = model.LastLayer(update.grads, update.sample_count);
  return update;
}

struct TrialOutput {
  std::vector<ResultRow> rows;  // one per (defense, attack)
  std::vector<CalibrationPoint> points;
};

// ---------------------------------------------------------------------------
// Batch-size style experiments: asr_vs_batchsize, defense_sweep,
// calibration_plot.

std::vector<DefenseSpec> DefenseList(const ExperimentConfig& config) {
  if (config.defenses.empty()) return {DefenseSpec{}};
  return config.defenses;
}

TrialOutput RunBatchTrial(const ExperimentConfig& config, const DataPools& pools, int batch_size,
                          int trial) {
  const auto b = static_cast<uint64_t>(batch_size);
  const auto t = static_cast<uint64_t>(trial);
  const uint64_t trial_seed = DeriveSeed(config.seed, {kTrialStream, b, t});
  const Network model = MakeModel(config.model, pools.train.input_dim(), config.num_classes,
                                  DeriveSeed(trial_seed, {0}));
  const double accuracy = TestAccuracy(model, pools.test);
  const auto defenses = DefenseList(config);

  // Every defense sees the same model and batch.
  std::vector<RoundUpdate> updates;
  for (size_t d = 0; d < defenses.size(); ++d) {
    Rng batch_rng(DeriveSeed(trial_seed, {1}));
    Rng defense_rng = MakeRng(config.seed, {kDefenseStream, d, b, t});
    updates.push_back(
        VictimUpdate(model, config, pools.train, batch_size, defenses[d], batch_rng, defense_rng));
  }

  TrialOutput out;
  out.rows.resize(defenses.size() * config.attacks.size());
  for (size_t a = 0; a < config.attacks.size(); ++a) {
    const AttackKind kind = config.attacks[a];
    Rng probe_rng = MakeRng(config.seed, {kAttackStream, b, a, t});
    const auto probed = ProbeParams(kind, model, config, batch_size, pools.train, probe_rng);
    for (size_t d = 0; d < defenses.size(); ++d) {
      const RoundUpdate& update = updates[d];
      Rng extract_rng = MakeRng(config.seed, {kAttackStream, b, a, t, d});
      const LabelMultiset extracted = Extract(kind, probed, update.last_layer, extract_rng);

      ResultRow& row = out.rows[d * config.attacks.size() + a];
      row.experiment = ExperimentKindName(config.kind);
      row.algorithm = AlgorithmName(config.algorithm);
      row.attack = AttackKindName(kind);
      row.model = ModelKindName(config.model);
      row.batch_size = batch_size;
      row.defense = defenses[d].Name();
      row.trial = trial;
      row.asr = AttackSuccessRate(extracted, update.truth);
      row.hellinger = Hellinger(extracted, update.truth);
      row.model_accuracy = accuracy;
      row.seed = trial_seed;

      if (config.kind == ExperimentKind::kCalibrationPlot && d == 0 &&
          kind == AttackKind::kLlgPlus) {
        const auto& g = update.last_layer.g;
        for (size_t i = 0; i < g.size(); ++i) {
          CalibrationPoint p;
          p.batch_size = batch_size;
          p.trial = trial;
          p.label = static_cast<Label>(i + 1);
          p.count = update.truth.counts()[i];
          p.gradient = g[i];
          p.calibrated = g[i] - probed->offsets[i];
          out.points.push_back(p);
        }
      }
    }
  }
  return out;
}

// Accuracy of a model trained for defense_train_rounds under each defense.
std::vector<double> AccuracyUnderDefense(const ExperimentConfig& config, const DataPools& pools,
                                         std::ostream* log) {
  const auto defenses = DefenseList(config);
  std::vector<double> accuracy(defenses.size(), 0.0);
  for (size_t d = 0; d < defenses.size(); ++d) {
    Rng split = MakeRng(config.seed, {kFederationStream, 0});
    auto clients = PartitionUnbalanced(pools.train, static_cast<size_t>(config.clients), 0.5, split);
    FederationConfig fc;
    fc.algorithm = config.algorithm;
    fc.gamma = config.gamma;
    fc.batch.size = config.batch_sizes.front();
    fc.batch.balance = config.balance;
    fc.clients_per_round = static_cast<size_t>(config.clients_per_round);
    fc.eta = config.learning_rate;
    fc.seed = DeriveSeed(config.seed, {kFederationStream, 1});
    fc.defense = defenses[d];
    fc.workers = config.workers;
    Federation federation(
        MakeModel(config.model, pools.train.input_dim(), config.num_classes,
                  DeriveSeed(config.seed, {kFederationStream, 2})),
        std::move(clients), fc);
    for (int r = 1; r <= config.defense_train_rounds; ++r) federation.RunRound(r);
    accuracy[d] = TestAccuracy(federation.global(), pools.test);
    if (log) {
      *log << "trained " << config.defense_train_rounds << " rounds under " << defenses[d].Name()
           << ": test accuracy " << accuracy[d] << '\n';
    }
  }
  return accuracy;
}

ExperimentResult RunBatchExperiment(const ExperimentConfig& config, const DataPools& pools,
                                    std::ostream* log) {
  const auto defenses = DefenseList(config);
  const size_t per_trial = defenses.size() * config.attacks.size();
  const auto trials = static_cast<size_t>(config.trials);

  ExperimentResult result;
  // Final order: defense, batch size, attack, trial.
  std::vector<std::vector<ResultRow>> by_cell(defenses.size() * config.batch_sizes.size() *
                                              config.attacks.size());
  for (size_t bi = 0; bi < config.batch_sizes.size(); ++bi) {
    const int batch_size = config.batch_sizes[bi];
    std::vector<TrialOutput> outputs(trials);
    ParallelFor(trials, config.workers, [&](size_t t) {
      outputs[t] = RunBatchTrial(config, pools, batch_size, static_cast<int>(t));
    });
    for (size_t t = 0; t < trials; ++t) {
      for (size_t k = 0; k < per_trial; ++k) {
        const size_t d = k / config.attacks.size();
        const size_t a = k % config.attacks.size();
        by_cell[(d * config.batch_sizes.size() + bi) * config.attacks.size() + a].push_back(
            std::move(outputs[t].rows[k]));
      }
      result.calibration.insert(result.calibration.end(), outputs[t].points.begin(),
                                outputs[t].points.end());
    }
    if (log) *log << "batch size " << batch_size << ": " << trials << " trials done\n";
  }
  for (auto& cell : by_cell) {
    for (auto& row : cell) result.rows.push_back(std::move(row));
  }

  if (config.kind == ExperimentKind::kDefenseSweep && config.defense_train_rounds > 0) {
    const auto accuracy = AccuracyUnderDefense(config, pools, log);
    std::map<std::string, double> by_name;
    for (size_t d = 0; d < defenses.size(); ++d) by_name[defenses[d].Name()] = accuracy[d];
    for (auto& row : result.rows) row.model_accuracy = by_name.at(row.defense);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Convergence sweep: train a federation and attack the victim as it goes.

bool EvaluatedRound(const ExperimentConfig& config, int round) {
  return round == 1 || round == config.rounds || (round - 1) % config.eval_every == 0;
}

ExperimentResult RunConvergence(const ExperimentConfig& config, const DataPools& pools,
                                std::ostream* log) {
  const auto defenses = DefenseList(config);
  ExperimentResult result;
  for (size_t d = 0; d < defenses.size(); ++d) {
    for (size_t bi = 0; bi < config.batch_sizes.size(); ++bi) {
      const int batch_size = config.batch_sizes[bi];
      const auto b = static_cast<uint64_t>(batch_size);
      Rng split = MakeRng(config.seed, {kFederationStream, 0});
      auto clients =
          PartitionUnbalanced(pools.train, static_cast<size_t>(config.clients), 0.5, split);
      FederationConfig fc;
      fc.algorithm = config.algorithm;
      fc.gamma = config.gamma;
      fc.batch.size = batch_size;
      fc.batch.balance = config.balance;
      fc.clients_per_round = static_cast<size_t>(config.clients_per_round);
      fc.eta = config.learning_rate;
      fc.seed = DeriveSeed(config.seed, {kFederationStream, 1, d, b});
      fc.defense = defenses[d];
      fc.workers = config.workers;
      Federation federation(
          MakeModel(config.model, pools.train.input_dim(), config.num_classes,
                    DeriveSeed(config.seed, {kFederationStream, 2, b})),
          std::move(clients), fc);

      std::vector<std::vector<ResultRow>> by_attack(config.attacks.size());
      for (int round = 1; round <= config.rounds; ++round) {
        const bool evaluate = EvaluatedRound(config, round);
        const Network before = federation.global();
        RoundResult shared = federation.RunRound(round);
        if (!evaluate) continue;

        const auto r = static_cast<uint64_t>(round);
        const uint64_t round_seed = DeriveSeed(config.seed, {kTrialStream, d, b, r});
        const double accuracy = TestAccuracy(before, pools.test);
        const ClientDataset& victim_data = federation.clients().front();

        // Observed updates: the shared one plus fresh batches of the victim.
        const auto batches = static_cast<size_t>(config.victim_batches);
        std::vector<RoundUpdate> observed(batches);
        observed[0] = std::move(shared.victim);
        ParallelFor(batches - 1, config.workers, [&](size_t k) {
          Rng batch_rng(DeriveSeed(round_seed, {kVictimStream, k}));
          Rng defense_rng(DeriveSeed(round_seed, {kDefenseStream, k}));
          observed[k + 1] = VictimUpdate(before, config, victim_data, batch_size, defenses[d],
                                         batch_rng, defense_rng);
        });

        for (size_t a = 0; a < config.attacks.size(); ++a) {
          const AttackKind kind = config.attacks[a];
          Rng attack_rng(DeriveSeed(round_seed, {kAttackStream, a}));
          const auto probed = ProbeParams(kind, before, config, batch_size, pools.train, attack_rng);
          double asr = 0.0, hellinger = 0.0;
          for (const RoundUpdate& update : observed) {
            const LabelMultiset extracted = Extract(kind, probed, update.last_layer, attack_rng);
            asr += AttackSuccessRate(extracted, update.truth);
            hellinger += Hellinger(extracted, update.truth);
          }
          ResultRow row;
          row.experiment = ExperimentKindName(config.kind);
          row.algorithm = AlgorithmName(config.algorithm);
          row.attack = AttackKindName(kind);
          row.model = ModelKindName(config.model);
          row.batch_size = batch_size;
          row.defense = defenses[d].Name();
          row.trial = round;
          row.asr = asr / static_cast<double>(batches);
          row.hellinger = hellinger / static_cast<double>(batches);
          row.model_accuracy = accuracy;
          row.seed = round_seed;
          by_attack[a].push_back(std::move(row));
        }
        if (log && (round == 1 || round % 100 == 0 || round == config.rounds)) {
          *log << "round " << round << "/" << config.rounds << " (B=" << batch_size << ", "
               << defenses[d].Name() << "): accuracy " << accuracy << '\n';
        }
      }
      for (auto& rows : by_attack) {
        for (auto& row : rows) result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
T ParseNumber(const std::string& text, size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("CSV line " + std::to_string(line) + ": malformed number '" + text + "'");
  }
  return value;
}

void WriteFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  out.close();
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace

std::string ExperimentKindName(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kAsrVsBatchSize:
      return "asr_vs_batchsize";
    case ExperimentKind::kConvergenceSweep:
      return "convergence_sweep";
    case ExperimentKind::kDefenseSweep:
      return "defense_sweep";
    case ExperimentKind::kCalibrationPlot:
      return "calibration_plot";
  }
  return "asr_vs_batchsize";
}

ExperimentKind ParseExperimentKind(const std::string& name) {
  for (auto kind : {ExperimentKind::kAsrVsBatchSize, ExperimentKind::kConvergenceSweep,
                    ExperimentKind::kDefenseSweep, ExperimentKind::kCalibrationPlot}) {
    if (ExperimentKindName(kind) == name) return kind;
  }
  throw ConfigError("unknown experiment kind '" + name +
                    "' (expected asr_vs_batchsize, convergence_sweep, defense_sweep or "
                    "calibration_plot)");
}

std::string AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kLlg:
      return "llg";
    case AttackKind::kLlgStar:
      return "llg_star";
    case AttackKind::kLlgPlus:
      return "llg_plus";
    case AttackKind::kRandom:
      return "random";
  }
  return "llg";
}

AttackKind ParseAttackKind(const std::string& name) {
  for (auto kind : {AttackKind::kLlg, AttackKind::kLlgStar, AttackKind::kLlgPlus,
                    AttackKind::kRandom}) {
    if (AttackKindName(kind) == name) return kind;
  }
  throw ConfigError("unknown attack '" + name + "' (expected llg, llg_star, llg_plus or random)");
}

void ExperimentConfig::Validate() const {
  if (attacks.empty()) throw ConfigError("'attacks' must list at least one attack");
  if (std::set<AttackKind>(attacks.begin(), attacks.end()).size() != attacks.size()) {
    throw ConfigError("'attacks' lists an attack twice");
  }
  if (batch_sizes.empty()) throw ConfigError("'batch_sizes' must not be empty");
  for (int b : batch_sizes) {
    if (b < 1) throw ConfigError("batch sizes must be >= 1, got " + std::to_string(b));
  }
  if (std::set<int>(batch_sizes.begin(), batch_sizes.end()).size() != batch_sizes.size()) {
    throw ConfigError("'batch_sizes' lists a size twice");
  }
  if (trials < 1) throw ConfigError("'trials' must be >= 1");
  if (gamma < 1) throw ConfigError("'gamma' must be >= 1");
  if (output.empty()) throw ConfigError("'output' must not be empty");
  if (num_classes < 2) throw ConfigError("'classes' must be >= 2");
  if (idx_images.empty() != idx_labels.empty()) {
    throw ConfigError("'idx_images' and 'idx_labels' must be given together");
  }
  if (idx_images.empty()) {
    if (input_dim < 1) throw ConfigError("'input_dim' must be >= 1");
    if (samples_per_class < 5) throw ConfigError("'samples_per_class' must be >= 5");
    if (!(spread >= 0.0) || !std::isfinite(spread)) throw ConfigError("'spread' must be >= 0");
    if (model == ModelKind::kCnn) {
      const auto side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(input_dim))));
      if (side * side != input_dim || side < 5) {
        throw ConfigError("the cnn model needs a square input of side >= 5, got input_dim " +
                          std::to_string(input_dim));
      }
    }
  }
  for (const auto& d : defenses) {
    Wrap("defenses", [&] {
      d.Validate();
      return 0;
    });
  }
  std::set<std::string> names;
  for (const auto& d : defenses) {
    if (!names.insert(d.Name()).second) throw ConfigError("defense '" + d.Name() + "' listed twice");
  }
  if (probes.impact_batches_per_class < 1) {
    throw ConfigError("'impact_batches_per_class' must be >= 1");
  }
  if (probes.offset_batch_sizes.empty()) throw ConfigError("'offset_batch_sizes' must not be empty");
  for (int b : probes.offset_batch_sizes) {
    if (b < 1) throw ConfigError("offset probe sizes must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("'learning_rate' must be a finite number >= 0");
  }
  if (workers < 1) throw ConfigError("'workers' must be >= 1");
  const bool federated = kind == ExperimentKind::kConvergenceSweep ||
                         (kind == ExperimentKind::kDefenseSweep && defense_train_rounds > 0);
  if (defense_train_rounds < 0) throw ConfigError("'defense_train_rounds' must be >= 0");
  if (federated) {
    if (kind == ExperimentKind::kConvergenceSweep && rounds < 1) {
      throw ConfigError("'rounds' must be >= 1");
    }
    if (clients < 1) throw ConfigError("'clients' must be >= 1");
    if (clients_per_round < 1 || clients_per_round > clients) {
      throw ConfigError("'clients_per_round' must be in [1, clients]");
    }
  }
  if (kind == ExperimentKind::kConvergenceSweep) {
    if (eval_every < 1) throw ConfigError("'eval_every' must be >= 1");
    if (victim_batches < 1) throw ConfigError("'victim_batches' must be >= 1");
  }
  if (kind == ExperimentKind::kCalibrationPlot &&
      std::find(attacks.begin(), attacks.end(), AttackKind::kLlgPlus) == attacks.end()) {
    throw ConfigError("a calibration_plot needs the llg_plus attack for its offsets");
  }
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      c.name = GetString(value, key);
    } else if (key == "experiment") {
      c.kind = ParseExperimentKind(GetString(value, key));
    } else if (key == "algorithm") {
      Wrap(key, [&] {
        ParseAlgorithmField(GetString(value, key), c);
        return 0;
      });
    } else if (key == "attacks") {
      if (!value.is_array()) throw ConfigError("'attacks' must be a list");
      c.attacks.clear();
      for (const auto& a : value) c.attacks.push_back(ParseAttackKind(GetString(a, key)));
    } else if (key == "model") {
      c.model = Wrap(key, [&] { return ParseModelKind(GetString(value, key)); });
    } else if (key == "batch_sizes") {
      if (!value.is_array()) throw ConfigError("'batch_sizes' must be a list");
      c.batch_sizes.clear();
      for (const auto& b : value) c.batch_sizes.push_back(GetInt(b, key));
    } else if (key == "balance") {
      c.balance = Wrap(key, [&] { return ParseBalance(GetString(value, key)); });
    } else if (key == "defense" || key == "defenses") {
      c.defenses.clear();
      if (value.is_null()) continue;
      if (value.is_string()) {
        c.defenses.push_back(Wrap(key, [&] { return ParseDefense(GetString(value, key)); }));
      } else if (value.is_array()) {
        for (const auto& d : value) {
          c.defenses.push_back(Wrap(key, [&] { return ParseDefense(GetString(d, key)); }));
        }
      } else {
        throw ConfigError("'" + key + "' must be a defense tag or a list of tags");
      }
    } else if (key == "trials") {
      c.trials = GetInt(value, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer");
      c.seed = Get<uint64_t>(value, key);
    } else if (key == "output") {
      c.output = GetString(value, key);
    } else if (key == "dummy") {
      c.dummy = Wrap(key, [&] { return ParseDummyKind(GetString(value, key)); });
    } else if (key == "impact_batches_per_class") {
      c.probes.impact_batches_per_class = GetInt(value, key);
    } else if (key == "offset_batch_sizes") {
      if (!value.is_array()) throw ConfigError("'offset_batch_sizes' must be a list");
      c.probes.offset_batch_sizes.clear();
      for (const auto& b : value) c.probes.offset_batch_sizes.push_back(GetInt(b, key));
    } else if (key == "gamma") {
      c.gamma = GetInt(value, key);
    } else if (key == "classes") {
      const int v = GetInt(value, key);
      if (v < 2) throw ConfigError("'classes' must be >= 2");
      c.num_classes = static_cast<size_t>(v);
    } else if (key == "input_dim") {
      const int v = GetInt(value, key);
      if (v < 1) throw ConfigError("'input_dim' must be >= 1");
      c.input_dim = static_cast<size_t>(v);
    } else if (key == "samples_per_class") {
      const int v = GetInt(value, key);
      if (v < 1) throw ConfigError("'samples_per_class' must be >= 1");
      c.samples_per_class = static_cast<size_t>(v);
    } else if (key == "spread") {
      c.spread = GetDouble(value, key);
    } else if (key == "idx_images") {
      c.idx_images = GetString(value, key);
    } else if (key == "idx_labels") {
      c.idx_labels = GetString(value, key);
    } else if (key == "learning_rate") {
      c.learning_rate = GetDouble(value, key);
    } else if (key == "rounds") {
      c.rounds = GetInt(value, key);
    } else if (key == "clients") {
      c.clients = GetInt(value, key);
    } else if (key == "clients_per_round") {
      c.clients_per_round = GetInt(value, key);
    } else if (key == "eval_every") {
      c.eval_every = GetInt(value, key);
    } else if (key == "victim_batches") {
      c.victim_batches = GetInt(value, key);
    } else if (key == "defense_train_rounds") {
      c.defense_train_rounds = GetInt(value, key);
    } else if (key == "workers") {
      c.workers = GetInt(value, key);
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return ParseConfig(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string ConfigToJson(const ExperimentConfig& c) {
  Json j = Json::object();
  if (!c.name.empty()) j["name"] = c.name;
  j["experiment"] = ExperimentKindName(c.kind);
  j["algorithm"] = AlgorithmName(c.algorithm);
  if (c.algorithm == Algorithm::kFedAvg) j["gamma"] = c.gamma;
  Json attacks = Json::array();
  for (auto a : c.attacks) attacks.push_back(AttackKindName(a));
  j["attacks"] = attacks;
  j["model"] = ModelKindName(c.model);
  j["batch_sizes"] = c.batch_sizes;
  j["balance"] = BalanceName(c.balance);
  Json defenses = Json::array();
  for (const auto& d : c.defenses) defenses.push_back(d.Name());
  j["defenses"] = defenses;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["dummy"] = DummyKindName(c.dummy);
  j["impact_batches_per_class"] = c.probes.impact_batches_per_class;
  j["offset_batch_sizes"] = c.probes.offset_batch_sizes;
  j["classes"] = c.num_classes;
  j["input_dim"] = c.input_dim;
  j["samples_per_class"] = c.samples_per_class;
  j["spread"] = c.spread;
  if (!c.idx_images.empty()) {
    j["idx_images"] = c.idx_images;
    j["idx_labels"] = c.idx_labels;
  }
  j["learning_rate"] = c.learning_rate;
  if (c.kind == ExperimentKind::kConvergenceSweep) {
    j["rounds"] = c.rounds;
    j["eval_every"] = c.eval_every;
    j["victim_batches"] = c.victim_batches;
  }
  if (c.kind == ExperimentKind::kConvergenceSweep || c.defense_train_rounds > 0) {
    j["clients"] = c.clients;
    j["clients_per_round"] = c.clients_per_round;
  }
  if (c.kind == ExperimentKind::kDefenseSweep) j["defense_train_rounds"] = c.defense_train_rounds;
  j["workers"] = c.workers;
  return j.dump(2) + "\n";
}

const std::vector<CatalogEntry>& ExperimentCatalog() {
  static const std::vector<CatalogEntry> catalog = [] {
    std::vector<CatalogEntry> out;
    auto add = [&](std::string name, std::string description, auto&& tweak) {
      ExperimentConfig c;
      c.name = name;
      c.output = name + ".csv";
      tweak(c);
      c.Validate();
      out.push_back({std::move(name), std::move(description), std::move(c)});
    };
    add("asr_fedsgd", "ASR vs batch size, FedSGD, untrained MLP, unbalanced batches",
        [](ExperimentConfig&) {});
    add("asr_fedavg", "ASR vs batch size, FedAvg with 10 local steps, untrained MLP",
        [](ExperimentConfig& c) {
          c.algorithm = Algorithm::kFedAvg;
          c.gamma = 10;
        });
    add("asr_fedsgd_cnn", "ASR vs batch size, FedSGD, untrained small CNN (8x8 inputs)",
        [](ExperimentConfig& c) { c.model = ModelKind::kCnn; });
    add("asr_balanced", "ASR vs batch size, FedSGD, untrained MLP, balanced batches",
        [](ExperimentConfig& c) { c.balance = Balance::kBalanced; });
    add("convergence_fedsgd", "ASR while training 1000 FedSGD rounds, B = 8, 10 of 50 clients",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kConvergenceSweep;
          c.batch_sizes = {8};
          c.trials = 1;
        });
    add("convergence_fedavg", "ASR while training 1000 FedAvg rounds, B = 8, 10 local steps",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kConvergenceSweep;
          c.algorithm = Algorithm::kFedAvg;
          c.batch_sizes = {8};
          c.trials = 1;
          c.learning_rate = 0.05;
        });
    add("defense_noise", "LLG+ vs batch size under Gaussian noise of several scales",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kDefenseSweep;
          c.attacks = {AttackKind::kLlgPlus, AttackKind::kRandom};
          c.defenses = {ParseDefense("none"), ParseDefense("noise:0.01"),
                        ParseDefense("noise:0.1"), ParseDefense("noise:1")};
        });
    add("defense_dp", "LLG+ vs batch size under clipping (bound 1) plus noise",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kDefenseSweep;
          c.attacks = {AttackKind::kLlgPlus, AttackKind::kRandom};
          c.defenses = {ParseDefense("none"), ParseDefense("dp:1:0.01"), ParseDefense("dp:1:0.1"),
                        ParseDefense("dp:1:1")};
        });
    add("defense_compression", "LLG+ vs batch size under threshold gradient compression",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kDefenseSweep;
          c.attacks = {AttackKind::kLlgPlus, AttackKind::kRandom};
          c.defenses = {ParseDefense("none"), ParseDefense("compress:0.2"),
                        ParseDefense("compress:0.4"), ParseDefense("compress:0.6"),
                        ParseDefense("compress:0.8")};
        });
    add("defense_accuracy", "LLG+ at B = 8 and test accuracy after 300 defended FedSGD rounds",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kDefenseSweep;
          c.attacks = {AttackKind::kLlgPlus, AttackKind::kRandom};
          c.batch_sizes = {8};
          c.defense_train_rounds = 300;
          c.defenses = {ParseDefense("none"), ParseDefense("noise:0.01"),
                        ParseDefense("noise:0.1"), ParseDefense("dp:1:0.01"),
                        ParseDefense("dp:1:0.1"), ParseDefense("compress:0.2"),
                        ParseDefense("compress:0.8")};
        });
    add("calibration", "Raw and offset-calibrated gradients vs label counts, untrained MLP",
        [](ExperimentConfig& c) {
          c.kind = ExperimentKind::kCalibrationPlot;
          c.attacks = {AttackKind::kLlgPlus};
          c.batch_sizes = {2, 8, 32, 128};
        });
    return out;
  }();
  return catalog;
}

const CatalogEntry& FindCatalogEntry(const std::string& name) {
  for (const auto& entry : ExperimentCatalog()) {
    if (entry.name == name) return entry;
  }
  throw ConfigError("no catalog experiment named '" + name + "'");
}

ExperimentResult RunExperiment(const ExperimentConfig& config, std::ostream* log) {
  config.Validate();
  const DataPools pools = LoadData(config);
  if (config.model == ModelKind::kCnn && !config.idx_images.empty()) {
    const size_t dim = pools.train.input_dim();
    const auto side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
    if (side * side != dim) throw ConfigError("the cnn model needs square images");
  }
  if (config.kind == ExperimentKind::kConvergenceSweep) return RunConvergence(config, pools, log);
  return RunBatchExperiment(config, pools, log);
}

std::string FormatCsv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.experiment + ',' + r.algorithm + ',' + r.attack + ',' + r.model + ',' +
           std::to_string(r.batch_size) + ',' + r.defense + ',' + std::to_string(r.trial) + ',' +
           FormatDouble(r.asr) + ',' + FormatDouble(r.hellinger) + ',' +
           FormatDouble(r.model_accuracy) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

void EmitCsv(const std::vector<ResultRow>& rows, const std::string& path) {
  WriteFile(path, FormatCsv(rows));
}

std::vector<ResultRow> ParseCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error("CSV header mismatch");
  std::vector<ResultRow> rows;
  size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != 11) {
      throw Error("CSV line " + std::to_string(number) + ": expected 11 fields, got " +
                  std::to_string(f.size()));
    }
    ResultRow r;
    r.experiment = f[0];
    r.algorithm = f[1];
    r.attack = f[2];
    r.model = f[3];
    r.batch_size = ParseNumber<int>(f[4], number);
    r.defense = f[5];
    r.trial = ParseNumber<int>(f[6], number);
    r.asr = ParseNumber<double>(f[7], number);
    r.hellinger = ParseNumber<double>(f[8], number);
    r.model_accuracy = ParseNumber<double>(f[9], number);
    r.seed = ParseNumber<uint64_t>(f[10], number);
    rows.push_back(std::move(r));
  }
  return rows;
}

void EmitCalibrationCsv(const std::vector<CalibrationPoint>& points, const std::string& path) {
  std::string out = "batch_size,trial,label,count,gradient,calibrated\n";
  for (const auto& p : points) {
    out += std::to_string(p.batch_size) + ',' + std::to_string(p.trial) + ',' +
           std::to_string(p.label) + ',' + std::to_string(p.count) + ',' +
           FormatDouble(p.gradient) + ',' + FormatDouble(p.calibrated) + '\n';
  }
  WriteFile(path, out);
}

std::vector<CellSummary> Summarize(const std::vector<ResultRow>& rows) {
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> asr;
  std::map<std::tuple<std::string, std::string, std::string, int, std::string>, size_t> index;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.algorithm, r.attack, r.model, r.batch_size, r.defense);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      CellSummary c;
      c.algorithm = r.algorithm;
      c.attack = r.attack;
      c.model = r.model;
      c.batch_size = r.batch_size;
      c.defense = r.defense;
      cells.push_back(c);
      asr.emplace_back();
    }
    CellSummary& c = cells[it->second];
    ++c.count;
    c.mean_hellinger += r.hellinger;
    c.mean_accuracy += r.model_accuracy;
    asr[it->second].push_back(r.asr);
  }
  for (size_t k = 0; k < cells.size(); ++k) {
    CellSummary& c = cells[k];
    const double n = static_cast<double>(c.count);
    double sum = 0.0;
    for (double v : asr[k]) sum += v;
    c.mean_asr = sum / n;
    double ss = 0.0;
    for (double v : asr[k]) ss += (v - c.mean_asr) * (v - c.mean_asr);
    c.std_asr = c.count > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    c.mean_hellinger /= n;
    c.mean_accuracy /= n;
  }
  return cells;
}

void PrintSummary(const std::vector<CellSummary>& cells, std::ostream& out) {
  out << std::left << std::setw(8) << "algo" << std::setw(10) << "attack" << std::setw(5)
      << "model" << std::right << std::setw(6) << "B" << "  " << std::left << std::setw(16)
      << "defense" << std::right << std::setw(6) << "n" << std::setw(18) << "ASR mean +- std"
      << std::setw(11) << "Hellinger" << std::setw(10) << "accuracy" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& c : cells) {
    std::ostringstream asr;
    asr << std::fixed << std::setprecision(3) << c.mean_asr << " +- " << c.std_asr;
    out << std::left << std::setw(8) << c.algorithm << std::setw(10) << c.attack << std::setw(5)
        << c.model << std::right << std::setw(6) << c.batch_size << "  " << std::left
        << std::setw(16) << c.defense << std::right << std::setw(6) << c.count << std::setw(18)
        << asr.str() << std::setw(11) << c.mean_hellinger << std::setw(10) << c.mean_accuracy
        << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

std::vector<CalibrationSummary> SummarizeCalibration(const std::vector<CalibrationPoint>& points) {
  std::map<int, std::vector<const CalibrationPoint*>> by_size;
  for (const auto& p : points) by_size[p.batch_size].push_back(&p);
  std::vector<CalibrationSummary> out;
  for (const auto& [size, group] : by_size) {
    std::vector<double> count, raw, calibrated;
    for (const auto* p : group) {
      count.push_back(p->count);
      raw.push_back(p->gradient);
      calibrated.push_back(p->calibrated);
    }
    CalibrationSummary s;
    s.batch_size = size;
    s.points = group.size();
    s.raw_rho = Pearson(raw, count);
    s.calibrated_rho = Pearson(calibrated, count);
    out.push_back(s);
  }
  return out;
}

}  // namespace llg
