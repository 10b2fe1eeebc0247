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

#include "simadapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "simadapt/error.hpp"
#include "simadapt/pca.hpp"

namespace simadapt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "train fraction must lie in (0, 1)");
  }
  if (pca_dim < 1 || adapt_dim < 1) throw Error(Errc::invalid_argument, "dimensions must be >= 1");
  if (temperatures.empty()) throw Error(Errc::invalid_argument, "at least one temperature is required");
  for (double t : temperatures) {
    if (!(t > 0.0)) throw Error(Errc::invalid_argument, "temperatures must be > 0");
  }
  if (epochs < 1) throw Error(Errc::invalid_argument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be > 0");
  if (runs < 1) throw Error(Errc::invalid_argument, "runs must be >= 1");
  if (ks.empty() || ks.front() != 1 || !std::is_sorted(ks.begin(), ks.end()) ||
      std::adjacent_find(ks.begin(), ks.end()) != ks.end()) {
    throw Error(Errc::invalid_argument, "recall ranks must be strictly increasing and start at 1");
  }
  if (n_bootstrap < 1) throw Error(Errc::invalid_argument, "bootstrap count must be >= 1");
  if (jobs < 1) throw Error(Errc::invalid_argument, "jobs must be >= 1");
}

TrainConfig ExperimentConfig::train_config(double temperature) const {
  TrainConfig tc;
  tc.temperature = temperature;
  tc.epochs = epochs;
  tc.learning_rate = learning_rate;
  tc.optimizer = optimizer;
  tc.eval_ks = ks;
  tc.ties = ties;
  return tc;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["model_label"] = model_label;
  j["dataset_label"] = dataset_label;
  j["train_frac"] = train_fraction;
  j["pca_dim"] = pca_dim;
  j["adapt_dim"] = adapt_dim;
  j["sigma"] = temperatures;
  j["epochs"] = epochs;
  j["lr"] = learning_rate;
  j["optimizer"] = to_string(optimizer);
  j["runs"] = runs;
  j["seed"] = base_seed;
  j["ks"] = ks;
  j["bootstrap"] = n_bootstrap;
  j["pca_mode"] = pca_mode == PcaMode::joint ? "joint" : "per_side";
  j["ties"] = ties == TieRule::optimistic ? "optimistic" : "pessimistic";
  j["jobs"] = jobs;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.model_label = j.value("model_label", c.model_label);
  c.dataset_label = j.value("dataset_label", c.dataset_label);
  c.train_fraction = j.value("train_frac", c.train_fraction);
  c.pca_dim = j.value("pca_dim", c.pca_dim);
  c.adapt_dim = j.value("adapt_dim", c.adapt_dim);
  if (j.contains("sigma")) {
    c.temperatures = j["sigma"].is_array() ? j["sigma"].get<std::vector<double>>()
                                           : std::vector<double>{j["sigma"].get<double>()};
  }
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("lr", c.learning_rate);
  c.optimizer = parse_optimizer(j.value("optimizer", to_string(c.optimizer)));
  c.runs = j.value("runs", c.runs);
  c.base_seed = j.value("seed", c.base_seed);
  if (j.contains("ks")) c.ks = j["ks"].get<std::vector<Index>>();
  c.n_bootstrap = j.value("bootstrap", c.n_bootstrap);
  const auto mode = j.value("pca_mode", std::string("joint"));
  if (mode != "joint" && mode != "per_side") throw Error(Errc::invalid_argument, "unknown pca_mode: " + mode);
  c.pca_mode = mode == "joint" ? PcaMode::joint : PcaMode::per_side;
  const auto ties = j.value("ties", std::string("optimistic"));
  if (ties != "optimistic" && ties != "pessimistic") throw Error(Errc::invalid_argument, "unknown ties: " + ties);
  c.ties = ties == "optimistic" ? TieRule::optimistic : TieRule::pessimistic;
  c.jobs = j.value("jobs", c.jobs);
  return c;
}

std::string ExperimentConfig::fingerprint() const {
  auto j = to_json();
  j.erase("jobs");  // scheduling only
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> recall_at(const RankResult& ranks, const std::vector<Index>& ks) {
  std::vector<double> out;
  out.reserve(ks.size());
  for (Index k : ks) out.push_back(asymmetric_recall(ranks, k));
  return out;
}

EmbeddingMatrix stack_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  EmbeddingMatrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

RunResult run_single(const PairedDataset& ds, const ExperimentConfig& cfg, Index run) {
  RunResult out;
  out.run = run;
  out.seed = cfg.base_seed + static_cast<std::uint64_t>(run);
  out.concat_dim = ds.dim();

  const SplitIndices split = split_pairs(ds, cfg.train_fraction, out.seed);
  const PairedDataset train_raw = subset(ds, split.train);
  const PairedDataset test_raw = subset(ds, split.test);
  out.n_train = train_raw.size();
  out.n_test = test_raw.size();
  out.concat_recall = recall_at(rank_pairs(test_raw.left, test_raw.right, cfg.ties), cfg.ks);

  PairedDataset train_red;
  PairedDataset test_red;
  train_red.pair_ids = train_raw.pair_ids;
  test_red.pair_ids = test_raw.pair_ids;
  if (cfg.pca_mode == PcaMode::joint) {
    const PcaModel pca = fit_pca(stack_rows(train_raw.left, train_raw.right), cfg.pca_dim);
    out.pca_variance_sum = variance_sum(pca);
    train_red.left = transform(pca, train_raw.left);
    train_red.right = transform(pca, train_raw.right);
    test_red.left = transform(pca, test_raw.left);
    test_red.right = transform(pca, test_raw.right);
  } else {
    const PcaModel left_pca = fit_pca(train_raw.left, cfg.pca_dim);
    const PcaModel right_pca = fit_pca(train_raw.right, cfg.pca_dim);
    out.pca_variance_sum = 0.5 * (variance_sum(left_pca) + variance_sum(right_pca));
    train_red.left = transform(left_pca, train_raw.left);
    train_red.right = transform(right_pca, train_raw.right);
    test_red.left = transform(left_pca, test_raw.left);
    test_red.right = transform(right_pca, test_raw.right);
  }
  out.pca_recall = recall_at(rank_pairs(test_red.left, test_red.right, cfg.ties), cfg.ks);

  for (double temperature : cfg.temperatures) {
    AdaptedRun adapted;
    adapted.temperature = temperature;
    try {
      TrainResult trained = train(train_red, cfg.train_config(temperature),
                                  init_model(cfg.pca_dim, cfg.adapt_dim, out.seed), &test_red);
      adapted.trace = std::move(trained.trace);
      adapted.model = std::move(trained.model);
    } catch (const Error& e) {
      if (e.code() != Errc::divergence) throw;
      adapted.failed = true;
      adapted.error = e.what();
    }
    out.adapted.push_back(std::move(adapted));
  }
  return out;
}

std::vector<RunResult> run_all(const PairedDataset& ds, const ExperimentConfig& cfg) {
  cfg.validate();
  check_dataset(ds);
  std::vector<RunResult> results(static_cast<std::size_t>(cfg.runs));
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (Index r = next++; r < cfg.runs; r = next++) {
      try {
        results[static_cast<std::size_t>(r)] = run_single(ds, cfg, r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.runs;
      }
    }
  };
  const int n_threads = static_cast<int>(std::min<Index>(cfg.jobs, cfg.runs));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------

const MeanStd& RecallSummary::at(Index k) const {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw Error(Errc::invalid_argument, "rank not in summary: " + std::to_string(k));
  return values[static_cast<std::size_t>(it - ks.begin())];
}

namespace {

template <typename Get>
RecallSummary summarize(const std::vector<Index>& ks, std::size_t n_items, Get get) {
  RecallSummary s;
  s.ks = ks;
  if (n_items == 0) return s;
  std::vector<double> column(n_items);
  for (std::size_t k = 0; k < ks.size(); ++k) {
    for (std::size_t i = 0; i < n_items; ++i) column[i] = get(i, k);
    s.values.push_back(mean_std(column));
  }
  return s;
}

}  // namespace

ExperimentReport build_report(const std::vector<RunResult>& runs, const ExperimentConfig& cfg) {
  if (runs.empty()) throw Error(Errc::not_found, "no runs found");
  ExperimentReport report;
  report.model_label = cfg.model_label;
  report.dataset_label = cfg.dataset_label;
  report.fingerprint = cfg.fingerprint();
  report.runs = static_cast<Index>(runs.size());
  report.concat_dim = runs.front().concat_dim;

  std::vector<double> variance;
  for (const auto& r : runs) variance.push_back(r.pca_variance_sum);
  report.pca_variance_sum = mean_std(variance);
  report.concat = summarize(cfg.ks, runs.size(), [&](std::size_t i, std::size_t k) { return runs[i].concat_recall[k]; });
  report.pca = summarize(cfg.ks, runs.size(), [&](std::size_t i, std::size_t k) { return runs[i].pca_recall[k]; });

  for (std::size_t t = 0; t < cfg.temperatures.size(); ++t) {
    TemperatureSummary summary;
    summary.temperature = cfg.temperatures[t];
    std::vector<TrainTrace> traces;
    for (const auto& r : runs) {
      const AdaptedRun& a = r.adapted.at(t);
      if (a.failed) {
        report.failures.push_back("run " + std::to_string(r.run) + " sigma " + temperature_tag(a.temperature) +
                                  ": " + a.error);
      } else {
        traces.push_back(a.trace);
      }
    }
    summary.runs_ok = static_cast<Index>(traces.size());
    if (!traces.empty()) {
      summary.selected_epoch = select_epoch(traces, cfg.n_bootstrap, cfg.base_seed);
      const auto& records = traces.front().records;
      std::size_t selected_index = 0;
      while (records[selected_index].epoch != summary.selected_epoch) ++selected_index;
      summary.selected = summarize(cfg.ks, traces.size(), [&](std::size_t i, std::size_t k) {
        return traces[i].records[selected_index].test_recall[k];
      });
      summary.final_epoch = summarize(cfg.ks, traces.size(), [&](std::size_t i, std::size_t k) {
        return traces[i].records.back().test_recall[k];
      });
    }
    report.adapted.push_back(std::move(summary));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string temperature_tag(double temperature) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, temperature);
    if (std::strtod(buf, nullptr) == temperature) break;
  }
  return buf;
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "missing " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_double(const std::string& s, const fs::path& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(Errc::bad_header, "bad number '" + s + "' in " + where.string());
  return v;
}

std::string run_dir_name(Index run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03lld", static_cast<long long>(run));
  return buf;
}

}  // namespace

void write_config(const ExperimentConfig& cfg, const fs::path& results_dir) {
  fs::create_directories(results_dir);
  write_text(results_dir / "config.json", cfg.to_json().dump(2) + "\n");
}

void write_run(const RunResult& run, const ExperimentConfig& cfg, const fs::path& results_dir) {
  const fs::path dir = results_dir / run_dir_name(run.run);
  fs::create_directories(dir);

  ordered_json j;
  j["run"] = run.run;
  j["seed"] = run.seed;
  j["n_train"] = run.n_train;
  j["n_test"] = run.n_test;
  j["concat_dim"] = run.concat_dim;
  j["pca_variance_sum"] = run.pca_variance_sum;
  j["ks"] = cfg.ks;
  j["concat_recall"] = run.concat_recall;
  j["pca_recall"] = run.pca_recall;
  j["adapted"] = json::array();
  for (const auto& a : run.adapted) {
    const std::string tag = temperature_tag(a.temperature);
    ordered_json entry;
    entry["sigma"] = a.temperature;
    entry["failed"] = a.failed;
    entry["error"] = a.error;
    if (!a.failed) {
      entry["trace"] = "trace_sigma" + tag + ".csv";
      entry["recall"] = "recall_sigma" + tag + ".csv";
      write_trace_csv(a.trace, dir / entry["trace"].get<std::string>());

      std::string csv = "epoch";
      for (Index k : a.trace.eval_ks) csv += ",ar@" + std::to_string(k);
      csv += '\n';
      for (const auto& rec : a.trace.records) {
        csv += std::to_string(rec.epoch);
        for (double v : rec.test_recall) csv += "," + fmt17(v);
        csv += '\n';
      }
      write_text(dir / entry["recall"].get<std::string>(), csv);
      if (a.model) {
        entry["model"] = "model_sigma" + tag;
        save_model(*a.model, dir / entry["model"].get<std::string>(), cfg.fingerprint());
      }
    }
    j["adapted"].push_back(entry);
  }
  write_text(dir / "run.json", j.dump(2) + "\n");
}

std::vector<RunResult> read_runs(const fs::path& results_dir, ExperimentConfig& cfg,
                                 std::vector<std::string>& problems) {
  if (!fs::is_directory(results_dir)) throw Error(Errc::not_found, "no runs found");
  const fs::path config_path = results_dir / "config.json";
  std::ifstream config_in(config_path);
  if (!config_in) throw Error(Errc::not_found, "no runs found (missing config.json)");
  cfg = ExperimentConfig::from_json(json::parse(config_in));

  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(results_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0) run_dirs.push_back(entry.path());
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw Error(Errc::not_found, "no runs found");

  std::vector<RunResult> runs;
  for (const auto& dir : run_dirs) {
    try {
      std::ifstream in(dir / "run.json");
      if (!in) throw Error(Errc::not_found, "missing " + (dir / "run.json").string());
      const json j = json::parse(in);
      RunResult r;
      r.run = j.at("run").get<Index>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.n_train = j.at("n_train").get<Index>();
      r.n_test = j.at("n_test").get<Index>();
      r.concat_dim = j.at("concat_dim").get<Index>();
      r.pca_variance_sum = j.at("pca_variance_sum").get<double>();
      if (j.at("ks").get<std::vector<Index>>() != cfg.ks) {
        throw Error(Errc::bad_header, dir.string() + ": ranks differ from config.json");
      }
      r.concat_recall = j.at("concat_recall").get<std::vector<double>>();
      r.pca_recall = j.at("pca_recall").get<std::vector<double>>();
      for (const auto& entry : j.at("adapted")) {
        AdaptedRun a;
        a.temperature = entry.at("sigma").get<double>();
        a.failed = entry.at("failed").get<bool>();
        a.error = entry.value("error", std::string());
        if (!a.failed) {
          const fs::path trace_path = dir / entry.at("trace").get<std::string>();
          const fs::path recall_path = dir / entry.at("recall").get<std::string>();
          const auto trace_rows = read_csv(trace_path);
          const auto recall_rows = read_csv(recall_path);
          if (trace_rows.size() < 2 || trace_rows.size() != recall_rows.size()) {
            throw Error(Errc::truncated, "partial trace in " + dir.string());
          }
          a.trace.eval_ks = cfg.ks;
          for (std::size_t i = 1; i < trace_rows.size(); ++i) {
            const auto& t = trace_rows[i];
            const auto& rc = recall_rows[i];
            if (t.size() != 4 || rc.size() != cfg.ks.size() + 1) throw Error(Errc::truncated, "partial row in " + dir.string());
            EpochRecord rec;
            rec.epoch = static_cast<Index>(parse_double(t[0], trace_path));
            rec.loss = parse_double(t[1], trace_path);
            rec.train_ar1 = parse_double(t[2], trace_path);
            rec.test_ar1 = parse_double(t[3], trace_path);
            for (std::size_t k = 1; k < rc.size(); ++k) rec.test_recall.push_back(parse_double(rc[k], recall_path));
            a.trace.records.push_back(std::move(rec));
          }
        }
        r.adapted.push_back(std::move(a));
      }
      if (r.adapted.size() != cfg.temperatures.size()) {
        throw Error(Errc::truncated, dir.string() + ": temperatures differ from config.json");
      }
      runs.push_back(std::move(r));
    } catch (const Error& e) {
      problems.push_back(e.what());
    } catch (const json::exception& e) {
      problems.push_back(dir.string() + ": " + e.what());
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------

std::string report_csv_header() {
  return "model,dataset,concat_dim,pca_variance_sum,concat_ar1,pca_ar1,"
         "adapted_ar1_sigma1_mean,adapted_ar1_sigma1_std,adapted_ar1_sigma15_mean,adapted_ar1_sigma15_std";
}

std::string report_csv_row(const ExperimentReport& report) {
  std::string row = report.model_label + "," + report.dataset_label + "," + std::to_string(report.concat_dim) + "," +
                    fmt6(report.pca_variance_sum.mean) + "," + fmt6(report.concat.at(1).mean) + "," +
                    fmt6(report.pca.at(1).mean);
  for (double sigma : {1.0, 15.0}) {
    const auto it = std::find_if(report.adapted.begin(), report.adapted.end(),
                                 [&](const TemperatureSummary& s) { return s.temperature == sigma; });
    if (it == report.adapted.end() || it->runs_ok == 0) {
      row += ",,";
    } else {
      row += "," + fmt6(it->selected.at(1).mean) + "," + fmt6(it->selected.at(1).stddev);
    }
  }
  return row;
}

namespace {

std::string curve_csv(const RecallSummary& s) {
  std::string csv = "k,mean,std\n";
  for (std::size_t i = 0; i < s.ks.size() && i < s.values.size(); ++i) {
    csv += std::to_string(s.ks[i]) + "," + fmt6(s.values[i].mean) + "," + fmt6(s.values[i].stddev) + "\n";
  }
  return csv;
}

ordered_json summary_json(const RecallSummary& s) {
  ordered_json j = ordered_json::array();
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    j.push_back({{"k", s.ks[i]}, {"mean", s.values[i].mean}, {"std", s.values[i].stddev}});
  }
  return j;
}

}  // namespace

void write_report(const ExperimentReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.csv", report_csv_header() + "\n" + report_csv_row(report) + "\n");
  write_text(out_dir / "curve_concat.csv", curve_csv(report.concat));
  write_text(out_dir / "curve_pca.csv", curve_csv(report.pca));

  ordered_json j;
  j["model"] = report.model_label;
  j["dataset"] = report.dataset_label;
  j["fingerprint"] = report.fingerprint;
  j["runs"] = report.runs;
  j["concat_dim"] = report.concat_dim;
  j["pca_variance_sum"] = {{"mean", report.pca_variance_sum.mean}, {"std", report.pca_variance_sum.stddev}};
  j["concat"] = summary_json(report.concat);
  j["pca"] = summary_json(report.pca);
  j["adapted"] = json::array();
  for (const auto& t : report.adapted) {
    const std::string tag = temperature_tag(t.temperature);
    write_text(out_dir / ("curve_adapted_sigma" + tag + ".csv"), curve_csv(t.selected));
    write_text(out_dir / ("curve_adapted_sigma" + tag + "_final.csv"), curve_csv(t.final_epoch));
    ordered_json entry;
    entry["sigma"] = t.temperature;
    entry["runs_ok"] = t.runs_ok;
    entry["selected_epoch"] = t.selected_epoch;
    entry["selection"] = "bootstrap over test traces (oracle-selected)";
    entry["selected"] = summary_json(t.selected);
    entry["final_epoch"] = summary_json(t.final_epoch);
    ordered_json ratios = ordered_json::array();
    for (std::size_t i = 0; i < t.selected.values.size(); ++i) {
      const double base = report.pca.values[i].mean;
      ratios.push_back({{"k", t.selected.ks[i]},
                        {"selected_over_pca", base > 0.0 ? t.selected.values[i].mean / base : 0.0},
                        {"final_over_pca", base > 0.0 ? t.final_epoch.values[i].mean / base : 0.0}});
    }
    entry["improvement"] = ratios;
    j["adapted"].push_back(entry);
  }
  j["failures"] = report.failures;
  write_text(out_dir / "report.json", j.dump(2) + "\n");
}

}  // namespace simadapt
