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

// llg-lab: runs label-extraction experiments and writes their CSV results.
//
//   llg-lab --list-experiments
//   llg-lab show NAME
//   llg-lab run (--config PATH | --preset NAME) [--seed S] [--out DIR]
//               [--trials N] [--workers W] [--quiet]

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "llg/experiment.h"

namespace {

namespace fs = std::filesystem;

void ListExperiments() {
  size_t width = 0;
  for (const auto& e : llg::ExperimentCatalog()) width = std::max(width, e.name.size());
  for (const auto& e : llg::ExperimentCatalog()) {
    std::cout << std::left << std::setw(static_cast<int>(width) + 2) << e.name
              << std::setw(19) << llg::ExperimentKindName(e.config.kind) << e.description << '\n';
  }
}

std::string PointsPath(const fs::path& csv) {
  fs::path p = csv;
  p.replace_filename(csv.stem().string() + "_points.csv");
  return p.string();
}

int Run(const std::string& config_path, const std::string& preset, std::optional<uint64_t> seed,
        const std::string& out_dir, std::optional<int> trials, std::optional<int> workers,
        bool quiet) {
  llg::ExperimentConfig config = config_path.empty() ? llg::FindCatalogEntry(preset).config
                                                     : llg::LoadConfig(config_path);
  if (seed) config.seed = *seed;
  if (trials) config.trials = *trials;
  if (workers) config.workers = *workers;
  config.Validate();

  fs::path output(config.output);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    output = fs::path(out_dir) / output.filename();
  } else if (output.has_parent_path()) {
    fs::create_directories(output.parent_path());
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  if (log) {
    *log << "running " << llg::ExperimentKindName(config.kind)
         << (config.name.empty() ? "" : " '" + config.name + "'") << " with seed " << config.seed
         << ", " << config.workers << " worker(s)\n";
  }
  const auto start = std::chrono::steady_clock::now();
  const llg::ExperimentResult result = llg::RunExperiment(config, log);
  llg::EmitCsv(result.rows, output.string());
  if (!result.calibration.empty()) {
    llg::EmitCalibrationCsv(result.calibration, PointsPath(output));
  }
  if (log) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    *log << "wrote " << result.rows.size() << " rows to " << output.string() << " in "
         << std::fixed << std::setprecision(1) << seconds << " s\n";
  }

  if (config.kind != llg::ExperimentKind::kConvergenceSweep) {
    llg::PrintSummary(llg::Summarize(result.rows), std::cout);
  } else {
    // Per-round rows are too many for a table; summarize first and last.
    std::vector<llg::ResultRow> ends;
    for (const auto& r : result.rows) {
      if (r.trial == 1 || r.trial == config.rounds) {
        ends.push_back(r);
        ends.back().defense += r.trial == 1 ? "@first" : "@last";
      }
    }
    llg::PrintSummary(llg::Summarize(ends), std::cout);
  }
  if (!result.calibration.empty()) {
    std::cout << "\n     B  points   rho(raw)  rho(calibrated)\n";
    for (const auto& s : llg::SummarizeCalibration(result.calibration)) {
      std::cout << std::setw(6) << s.batch_size << std::setw(8) << s.points << std::fixed
                << std::setprecision(4) << std::setw(11) << s.raw_rho << std::setw(17)
                << s.calibrated_rho << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label extraction experiments on simulated federated learning"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-experiments", list, "Print the built-in experiment catalog");

  auto* show = app.add_subcommand("show", "Print a catalog experiment as a JSON config");
  std::string show_name;
  show->add_option("name", show_name, "Catalog experiment name")->required();

  auto* run = app.add_subcommand("run", "Run an experiment and write its CSV");
  std::string config_path, preset, out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> trials, workers;
  bool quiet = false;
  auto* config_opt = run->add_option("--config", config_path, "JSON config file")
                         ->check(CLI::ExistingFile);
  auto* preset_opt = run->add_option("--preset", preset, "Catalog experiment name");
  config_opt->excludes(preset_opt);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Directory for the output files");
  run->add_option("--trials", trials, "Override the number of trials")->check(CLI::PositiveNumber);
  run->add_option("--workers", workers, "Concurrent trials")->check(CLI::PositiveNumber);
  run->add_flag("-q,--quiet", quiet, "No progress on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list) {
      ListExperiments();
      return 0;
    }
    if (*show) {
      std::cout << llg::ConfigToJson(llg::FindCatalogEntry(show_name).config);
      return 0;
    }
    if (*run) {
      if (config_path.empty() && preset.empty()) {
        std::cerr << "llg-lab run: one of --config or --preset is required\n";
        return 2;
      }
      return Run(config_path, preset, seed, out_dir, trials, workers, quiet);
    }
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "llg-lab: error: " << e.what() << '\n';
    return 1;
  }
}
