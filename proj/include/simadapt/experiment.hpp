// Copyright 2026 The simadapt Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simadapt/adapter.hpp"
#include "simadapt/embedding_store.hpp"
#include "simadapt/retrieval.hpp"

namespace simadapt {

/// Joint: one PCA over the train rows of both sides. Per side: each side
/// gets its own PCA fitted on its own train rows.
enum class PcaMode { joint, per_side };

struct ExperimentConfig {
  std::string model_label = "synthetic";
  std::string dataset_label = "synth";
  double train_fraction = 0.75;
  Index pca_dim = 256;
  Index adapt_dim = 1024;
  std::vector<double> temperatures{15.0};
  Index epochs = 150;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  Index runs = 20;
  std::uint64_t base_seed = 0;
  std::vector<Index> ks{1, 5, 10, 20, 50, 100};
  Index n_bootstrap = 1000;
  PcaMode pca_mode = PcaMode::joint;
  TieRule ties = TieRule::optimistic;
  /// Upper bound on concurrently executing runs.
  int jobs = 1;

  void validate() const;
  /// Training settings for one temperature.
  TrainConfig train_config(double temperature) const;
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string fingerprint() const;
};

/// One temperature's training inside a run.
struct AdaptedRun {
  double temperature = 0.0;
  bool failed = false;
  std::string error;
  TrainTrace trace;
  std::optional<AdaptationModel> model;
};

struct RunResult {
  Index run = 0;
  std::uint64_t seed = 0;
  Index n_train = 0;
  Index n_test = 0;
  Index concat_dim = 0;
  double pca_variance_sum = 0.0;
  std::vector<double> concat_recall;  // per ExperimentConfig::ks
  std::vector<double> pca_recall;
  std::vector<AdaptedRun> adapted;    // per ExperimentConfig::temperatures
};

/// Mean and sample std per k across runs.
struct RecallSummary {
  std::vector<Index> ks;
  std::vector<MeanStd> values;

  const MeanStd& at(Index k) const;
};

struct TemperatureSummary {
  double temperature = 0.0;
  Index runs_ok = 0;
  /// Bootstrap-selected over test traces, so these scores are oracle-selected.
  Index selected_epoch = 0;
  RecallSummary selected;
  /// Scores of the last epoch.
  RecallSummary final_epoch;
};

struct ExperimentReport {
  std::string model_label;
  std::string dataset_label;
  std::string fingerprint;
  Index runs = 0;
  Index concat_dim = 0;
  MeanStd pca_variance_sum;
  RecallSummary concat;
  RecallSummary pca;
  std::vector<TemperatureSummary> adapted;
  std::vector<std::string> failures;
};

/// Everything one run of the protocol needs: seed = base_seed + run for
/// both the split and the weight initialization.
RunResult run_single(const PairedDataset& ds, const ExperimentConfig& cfg, Index run);

/// All runs, at most cfg.jobs at a time. Divergent trainings are recorded in
/// the run and do not stop the others.
std::vector<RunResult> run_all(const PairedDataset& ds, const ExperimentConfig& cfg);

ExperimentReport build_report(const std::vector<RunResult>& runs, const ExperimentConfig& cfg);

inline ExperimentReport run_experiment(const PairedDataset& ds, const ExperimentConfig& cfg) {
  return build_report(run_all(ds, cfg), cfg);
}

// ---------------------------------------------------------------------------
// Results directory layout
//
//   config.json                       resolved ExperimentConfig
//   run_000/run.json                  scalars and baseline recalls
//   run_000/trace_sigma15.csv         epoch,loss,train_ar1,test_ar1
//   run_000/recall_sigma15.csv        epoch,ar@k... (test split)
//   run_000/model_sigma15.{emb,json}  final weights

/// "15", "1", "0.5": shortest round-trip rendering used in file and column names.
std::string temperature_tag(double temperature);

void write_run(const RunResult& run, const ExperimentConfig& cfg, const std::filesystem::path& results_dir);
void write_config(const ExperimentConfig& cfg, const std::filesystem::path& results_dir);

/// Reads config.json and every run_* directory. Missing pieces are
/// collected in `problems`; throws Errc::not_found when there are no runs.
std::vector<RunResult> read_runs(const std::filesystem::path& results_dir, ExperimentConfig& cfg,
                                 std::vector<std::string>& problems);

/// report.csv, report.json and curve_<config>.csv files.
void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// The report.csv header row.
std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& report);

}  // namespace simadapt
