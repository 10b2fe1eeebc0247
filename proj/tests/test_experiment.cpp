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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "simadapt/experiment.hpp"
#include "simadapt/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace simadapt;
using simadapt::testing::code_of;
using simadapt::testing::scratch;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.pca_dim = 8;
  cfg.adapt_dim = 16;
  cfg.epochs = 4;
  cfg.runs = 3;
  cfg.temperatures = {1.0, 15.0};
  cfg.ks = {1, 5, 10};
  cfg.n_bootstrap = 25;
  cfg.learning_rate = 1e-2;
  return cfg;
}

const PairedDataset& tiny() {
  static const PairedDataset ds = generate(synth_preset("tiny"));
  return ds;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ExperimentConfigTest, JsonRoundTripAndFingerprint) {
  auto cfg = small_config();
  cfg.pca_mode = PcaMode::per_side;
  cfg.ties = TieRule::pessimistic;
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.fingerprint(), cfg.fingerprint());
  EXPECT_EQ(cfg.fingerprint().size(), 16u);
  auto jobs = cfg;
  jobs.jobs = 4;  // concurrency does not change results
  EXPECT_EQ(jobs.fingerprint(), cfg.fingerprint());
  auto other = cfg;
  other.epochs = 5;
  EXPECT_NE(other.fingerprint(), cfg.fingerprint());
}

TEST(ExperimentConfigTest, Defaults) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.runs, 20);
  EXPECT_EQ(cfg.pca_dim, 256);
  EXPECT_EQ(cfg.adapt_dim, 1024);
  EXPECT_EQ(cfg.epochs, 150);
  EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.75);
  ASSERT_EQ(cfg.temperatures.size(), 1u);
  EXPECT_EQ(cfg.temperatures[0], 15.0);
}

TEST(ExperimentConfigTest, Validation) {
  auto cfg = small_config();
  cfg.ks = {5, 10};
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_argument);
  cfg = small_config();
  cfg.runs = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_argument);
  cfg = small_config();
  cfg.temperatures.clear();
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_argument);
}

TEST(TemperatureTag, ShortestRoundTrip) {
  EXPECT_EQ(temperature_tag(15.0), "15");
  EXPECT_EQ(temperature_tag(1.0), "1");
  EXPECT_EQ(temperature_tag(0.5), "0.5");
  EXPECT_EQ(temperature_tag(0.1), "0.1");
}

TEST(Experiment, RunUsesSeedPlusIndex) {
  const auto cfg = small_config();
  const auto r = run_single(tiny(), cfg, 2);
  EXPECT_EQ(r.seed, 2u);
  EXPECT_EQ(r.n_train, 150);
  EXPECT_EQ(r.n_test, 50);
  EXPECT_EQ(r.concat_dim, 32);
  ASSERT_EQ(r.adapted.size(), 2u);
  EXPECT_EQ(r.adapted[1].trace.records.size(), 5u);
  EXPECT_EQ(r.adapted[1].model->init_seed, 2u);
  // Curves never decrease and reach 1 at k = n_test.
  for (const auto* curve : {&r.concat_recall, &r.pca_recall, &r.adapted[0].trace.records.back().test_recall}) {
    for (std::size_t k = 1; k < curve->size(); ++k) EXPECT_GE((*curve)[k], (*curve)[k - 1]);
  }
}

TEST(Experiment, ConcurrencyDoesNotChangeResults) {
  auto cfg = small_config();
  const auto serial = build_report(run_all(tiny(), cfg), cfg);
  cfg.jobs = 3;
  const auto parallel = build_report(run_all(tiny(), cfg), cfg);
  EXPECT_EQ(report_csv_row(serial), report_csv_row(parallel));
}

TEST(Experiment, PerSidePca) {
  auto cfg = small_config();
  cfg.pca_mode = PcaMode::per_side;
  cfg.runs = 1;
  const auto r = run_single(tiny(), cfg, 0);
  EXPECT_GT(r.pca_variance_sum, 0.0);
  EXPECT_LE(r.pca_variance_sum, 1.0);
}

TEST(Report, WriteReadRebuildIsByteEqual) {
  const auto cfg = small_config();
  const auto runs = run_all(tiny(), cfg);
  const auto dir = scratch("experiment_io");
  write_config(cfg, dir);
  for (const auto& r : runs) write_run(r, cfg, dir);
  const auto direct = build_report(runs, cfg);
  write_report(direct, dir / "direct");

  ExperimentConfig read_cfg;
  std::vector<std::string> problems;
  const auto back = read_runs(dir, read_cfg, problems);
  EXPECT_TRUE(problems.empty());
  ASSERT_EQ(back.size(), 3u);
  write_report(build_report(back, read_cfg), dir / "reread");
  for (const char* name : {"report.csv", "curve_pca.csv", "curve_adapted_sigma15.csv", "curve_adapted_sigma1_final.csv"}) {
    EXPECT_EQ(slurp(dir / "direct" / name), slurp(dir / "reread" / name)) << name;
  }
  std::ifstream csv(dir / "direct" / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, report_csv_header());
  EXPECT_TRUE(fs::exists(dir / "run_000" / "model_sigma15.emb"));
}

TEST(Report, PartialRunIsListed) {
  auto cfg = small_config();
  cfg.runs = 2;
  const auto dir = scratch("experiment_partial");
  write_config(cfg, dir);
  for (const auto& r : run_all(tiny(), cfg)) write_run(r, cfg, dir);
  fs::remove(dir / "run_001" / "recall_sigma15.csv");
  ExperimentConfig read_cfg;
  std::vector<std::string> problems;
  const auto back = read_runs(dir, read_cfg, problems);
  EXPECT_EQ(back.size(), 1u);
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("run_001"), std::string::npos);
}

TEST(Report, EmptyDirectoryHasNoRuns) {
  const auto dir = scratch("experiment_empty");
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  try {
    read_runs(dir, cfg, problems);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_found);
    EXPECT_NE(std::string(e.what()).find("no runs found"), std::string::npos);
  }
}

TEST(Report, MissingTemperatureLeavesEmptyColumns) {
  auto cfg = small_config();
  cfg.temperatures = {15.0};
  cfg.runs = 1;
  const auto row = report_csv_row(build_report(run_all(tiny(), cfg), cfg));
  // sigma 1 columns are empty, sigma 15 filled
  EXPECT_NE(row.find(",,,"), std::string::npos);
  EXPECT_EQ(row.substr(0, 16), "synthetic,synth,");
}
