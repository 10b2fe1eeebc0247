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

#include "simadapt/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "simadapt/adapter.hpp"
#include "simadapt/embedding_store.hpp"
#include "simadapt/error.hpp"
#include "simadapt/experiment.hpp"
#include "simadapt/pca.hpp"
#include "simadapt/retrieval.hpp"
#include "simadapt/synth.hpp"

namespace simadapt {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::dimension_mismatch:
      return kExitUsage;
    case Errc::degenerate_data:
    case Errc::non_finite:
    case Errc::divergence:
      return kExitNumerical;
    default:
      return kExitIo;
  }
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fills options that were not given on the command line from a JSON file.
/// Keys use the long flag names with '_' or '-' separators.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "config file not found: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config file: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = cmd.get_option_no_throw(flag);
    if (!opt || flag == "--config") throw UsageError("unknown config key: " + key);
    if (opt->count() > 0) continue;  // command line wins
    auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(as_text(item));
    } else if (value.is_boolean()) {
      if (value.get<bool>()) opt->add_result("true");
      else continue;
    } else {
      opt->add_result(as_text(value));
    }
    opt->run_callback();
  }
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SIMADAPT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    throw UsageError("SIMADAPT_SEED must be an unsigned integer");
  }
  return 0;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

/// The reproducibility record; the only output that carries a timestamp.
void write_run_manifest(const fs::path& dir, const std::string& command, const std::string& config_path,
                        const ordered_json& resolved) {
  ordered_json m;
  m["tool"] = "simadapt";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_file"] = config_path;
  m["output_dir"] = dir.string();
  m["resolved"] = resolved;
  m["created"] = utc_timestamp();
  std::ofstream out(dir / "run_manifest.json", std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write run manifest in " + dir.string());
  out << m.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(Errc::io_error, "cannot create output directory: " + dir.string());
  const fs::path probe = dir / ".simadapt_write_probe";
  std::ofstream test(probe);
  if (!test) throw Error(Errc::io_error, "output directory is not writable: " + dir.string());
  test.close();
  fs::remove(probe, ec);
}

std::string recall_line(const RankResult& ranks, const std::vector<Index>& ks) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    ss << (i ? "  " : "") << "aR@" << ks[i] << "=" << asymmetric_recall(ranks, ks[i]);
  }
  return ss.str();
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string preset = "default";
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  Index pairs = 0;
  Index visual_dim = 0;
  Index semantic_dim = 0;
  Index ambient_dim = 0;
  double rho = -1.0;
  double noise = -1.0;
  bool distinct_visual = false;
};

int cmd_gen(CLI::App& cmd, const GenOptions& o, std::ostream& out) {
  SynthConfig cfg = synth_preset(o.preset);
  cfg.seed = cmd.get_option("--seed")->count() ? o.seed : default_seed();
  if (cmd.get_option("--pairs")->count()) cfg.n_pairs = o.pairs;
  if (cmd.get_option("--visual-dim")->count()) cfg.visual_dim = o.visual_dim;
  if (cmd.get_option("--semantic-dim")->count()) cfg.semantic_dim = o.semantic_dim;
  if (cmd.get_option("--ambient-dim")->count()) cfg.ambient_dim = o.ambient_dim;
  if (cmd.get_option("--rho")->count()) cfg.semantic_strength = o.rho;
  if (cmd.get_option("--noise")->count()) cfg.noise_std = o.noise;
  cfg.distinct_visual_mixing = o.distinct_visual;
  cfg.validate();

  const fs::path dir(o.out);
  ensure_dir(dir);
  const PairedDataset ds = generate(cfg);
  save_dataset(ds, dir, {"synthetic", "synth-" + o.preset});

  ordered_json resolved;
  resolved["preset"] = o.preset;
  resolved["seed"] = cfg.seed;
  resolved["pairs"] = cfg.n_pairs;
  resolved["visual_dim"] = cfg.visual_dim;
  resolved["semantic_dim"] = cfg.semantic_dim;
  resolved["ambient_dim"] = cfg.ambient_dim;
  resolved["rho"] = cfg.semantic_strength;
  resolved["noise"] = cfg.noise_std;
  resolved["distinct_visual"] = cfg.distinct_visual_mixing;
  write_run_manifest(dir, "gen", o.config, resolved);
  out << "wrote " << cfg.n_pairs << " pairs (" << cfg.ambient_dim << " dims) to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReduceOptions {
  std::string data;
  std::string out;
  std::string config;
  Index pca_dim = 256;
  double train_frac = 0.75;
  std::uint64_t seed = 0;
  std::string pca_mode = "joint";
};

int cmd_reduce(CLI::App& cmd, const ReduceOptions& o, std::ostream& out) {
  const std::uint64_t seed = cmd.get_option("--seed")->count() ? o.seed : default_seed();
  DatasetLabels labels;
  const PairedDataset ds = load_dataset(o.data, &labels);
  const SplitIndices split = split_pairs(ds, o.train_frac, seed);
  const PairedDataset train_rows = subset(ds, split.train);

  const fs::path dir(o.out);
  ensure_dir(dir);
  PairedDataset reduced;
  reduced.pair_ids = ds.pair_ids;
  ordered_json resolved;
  if (o.pca_mode == "joint") {
    EmbeddingMatrix stacked(2 * train_rows.size(), ds.dim());
    stacked << train_rows.left, train_rows.right;
    const PcaModel pca = fit_pca(stacked, o.pca_dim);
    save_pca(pca, dir / "pca");
    reduced.left = transform(pca, ds.left);
    reduced.right = transform(pca, ds.right);
    resolved["pca_variance_sum"] = variance_sum(pca);
  } else if (o.pca_mode == "per_side") {
    const PcaModel left = fit_pca(train_rows.left, o.pca_dim);
    const PcaModel right = fit_pca(train_rows.right, o.pca_dim);
    save_pca(left, dir / "pca_left");
    save_pca(right, dir / "pca_right");
    reduced.left = transform(left, ds.left);
    reduced.right = transform(right, ds.right);
    resolved["pca_variance_sum"] = 0.5 * (variance_sum(left) + variance_sum(right));
  } else {
    throw UsageError("--pca-mode must be joint or per_side");
  }
  save_dataset(reduced, dir, labels);

  ordered_json split_json;
  split_json["seed"] = seed;
  split_json["train"] = split.train;
  split_json["test"] = split.test;
  std::ofstream(dir / "split.json", std::ios::trunc) << split_json.dump() << '\n';

  resolved["data"] = o.data;
  resolved["pca_dim"] = o.pca_dim;
  resolved["train_frac"] = o.train_frac;
  resolved["seed"] = seed;
  resolved["pca_mode"] = o.pca_mode;
  write_run_manifest(dir, "reduce", o.config, resolved);
  out << "reduced " << ds.dim() << " -> " << o.pca_dim << " dims, variance kept "
      << resolved["pca_variance_sum"].get<double>() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::string out;
  std::string config;
  ExperimentConfig exp;
  std::vector<double> sigmas{15.0};
  std::string optimizer = "adam";
  std::string pca_mode = "joint";
  std::string ties = "optimistic";
  std::string model_label;
  std::string dataset_label;
};

void print_report(const ExperimentReport& report, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << "runs: " << report.runs << "  concat dim: " << report.concat_dim
      << "  PCA variance sum: " << report.pca_variance_sum.mean << "\n";
  auto line = [&](const std::string& name, const RecallSummary& s) {
    out << "  " << std::left << std::setw(22) << name << std::right;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      out << "  @" << s.ks[i] << " " << s.values[i].mean << " +/- " << 2.0 * s.values[i].stddev;
    }
    out << "\n";
  };
  line("concatenated", report.concat);
  line("pca", report.pca);
  for (const auto& t : report.adapted) {
    if (t.runs_ok == 0) continue;
    line("adapted s=" + temperature_tag(t.temperature) + " ep" + std::to_string(t.selected_epoch), t.selected);
    line("adapted s=" + temperature_tag(t.temperature) + " final", t.final_epoch);
  }
  out.unsetf(std::ios::fixed);
  out << std::setprecision(6);
}

int cmd_train(CLI::App& cmd, TrainOptions& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig& cfg = o.exp;
  if (!cmd.get_option("--seed")->count()) cfg.base_seed = default_seed();
  cfg.temperatures = o.sigmas;
  cfg.optimizer = parse_optimizer(o.optimizer);
  if (o.pca_mode != "joint" && o.pca_mode != "per_side") throw UsageError("--pca-mode must be joint or per_side");
  cfg.pca_mode = o.pca_mode == "joint" ? PcaMode::joint : PcaMode::per_side;
  if (o.ties != "optimistic" && o.ties != "pessimistic") throw UsageError("--ties must be optimistic or pessimistic");
  cfg.ties = o.ties == "optimistic" ? TieRule::optimistic : TieRule::pessimistic;

  DatasetLabels labels;
  const PairedDataset ds = load_dataset(o.data, &labels);
  cfg.model_label = o.model_label.empty() ? labels.model : o.model_label;
  cfg.dataset_label = o.dataset_label.empty() ? labels.dataset : o.dataset_label;
  cfg.validate();

  const fs::path dir(o.out);
  ensure_dir(dir);
  write_config(cfg, dir);
  ordered_json resolved = cfg.to_json();
  resolved["data"] = o.data;
  write_run_manifest(dir, "train", o.config, resolved);

  const auto runs = run_all(ds, cfg);
  for (const auto& r : runs) write_run(r, cfg, dir);
  const ExperimentReport report = build_report(runs, cfg);
  write_report(report, dir);
  print_report(report, out);

  if (!report.failures.empty()) {
    err << report.failures.size() << " training run(s) failed:\n";
    for (const auto& f : report.failures) err << "  " << f << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string data;
  std::string model;
  std::string pca;
  std::string out;
  std::vector<Index> ks{1, 5, 10, 20, 50, 100};
  std::string ties = "optimistic";
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.ties != "optimistic" && o.ties != "pessimistic") throw UsageError("--ties must be optimistic or pessimistic");
  const TieRule ties = o.ties == "optimistic" ? TieRule::optimistic : TieRule::pessimistic;
  PairedDataset ds = load_dataset(o.data);
  if (!o.pca.empty()) {
    const PcaModel pca = load_pca(o.pca);
    ds.left = transform(pca, ds.left);
    ds.right = transform(pca, ds.right);
  }
  if (!o.model.empty()) {
    const AdaptationModel model = load_model(o.model);
    ds.left = forward(model, ds.left);
    ds.right = forward(model, ds.right);
  }
  const RankResult ranks = rank_pairs(ds.left, ds.right, ties);
  const auto curve = recall_curve(ranks, o.ks);

  ordered_json j;
  j["data"] = o.data;
  j["pca"] = o.pca;
  j["model"] = o.model;
  j["pairs"] = ds.size();
  j["recall"] = ordered_json::array();
  for (const auto& p : curve) j["recall"].push_back({{"k", p.k}, {"ar", p.recall}});
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw Error(Errc::io_error, "cannot open for write: " + o.out);
    f << j.dump(2) << '\n';
  }
  out << recall_line(ranks, o.ks) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::string& results, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  const auto runs = read_runs(results, cfg, problems);
  if (!problems.empty()) {
    err << "incomplete results in " << results << ":\n";
    for (const auto& p : problems) err << "  " << p << "\n";
    return kExitIo;
  }
  const ExperimentReport report = build_report(runs, cfg);
  write_report(report, out_dir.empty() ? fs::path(results) : fs::path(out_dir));
  print_report(report, out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn and evaluate a visual-similarity adaptation of image embeddings", "simadapt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("simadapt ") + kVersion);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic paired-embedding dataset");
  gen_cmd->add_option("--preset", gen.preset, "default | tiny")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (default: $SIMADAPT_SEED or 0)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config, "JSON file with option values");
  gen_cmd->add_option("--pairs", gen.pairs);
  gen_cmd->add_option("--visual-dim", gen.visual_dim);
  gen_cmd->add_option("--semantic-dim", gen.semantic_dim);
  gen_cmd->add_option("--ambient-dim", gen.ambient_dim);
  gen_cmd->add_option("--rho", gen.rho, "Semantic strength");
  gen_cmd->add_option("--noise", gen.noise, "Noise standard deviation");
  gen_cmd->add_flag("--distinct-visual", gen.distinct_visual, "Separate visual bases for left and right");

  ReduceOptions reduce;
  CLI::App* reduce_cmd = app.add_subcommand("reduce", "Fit PCA on a train split and project a dataset");
  reduce_cmd->add_option("--data", reduce.data, "Dataset manifest")->required();
  reduce_cmd->add_option("--out", reduce.out, "Output directory")->required();
  reduce_cmd->add_option("--config", reduce.config, "JSON file with option values");
  reduce_cmd->add_option("--pca-dim", reduce.pca_dim)->capture_default_str();
  reduce_cmd->add_option("--train-frac", reduce.train_frac)->capture_default_str();
  reduce_cmd->add_option("--seed", reduce.seed);
  reduce_cmd->add_option("--pca-mode", reduce.pca_mode, "joint | per_side")->capture_default_str();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Run the multi-run adaptation experiment");
  train_cmd->add_option("--data", tr.data, "Dataset manifest")->required();
  train_cmd->add_option("--out", tr.out, "Results directory")->required();
  train_cmd->add_option("--config", tr.config, "JSON file with option values");
  train_cmd->add_option("--pca-dim", tr.exp.pca_dim)->capture_default_str();
  train_cmd->add_option("--adapt-dim", tr.exp.adapt_dim)->capture_default_str();
  train_cmd->add_option("--epochs", tr.exp.epochs)->capture_default_str();
  train_cmd->add_option("--sigma", tr.sigmas, "Temperature(s); repeat for several")->capture_default_str();
  train_cmd->add_option("--runs", tr.exp.runs)->capture_default_str();
  train_cmd->add_option("--train-frac", tr.exp.train_fraction)->capture_default_str();
  train_cmd->add_option("--lr", tr.exp.learning_rate)->capture_default_str();
  train_cmd->add_option("--optimizer", tr.optimizer, "adam | sgd")->capture_default_str();
  train_cmd->add_option("--seed", tr.exp.base_seed, "Base seed; run r uses seed + r");
  train_cmd->add_option("--ks", tr.exp.ks, "Recall ranks")->capture_default_str();
  train_cmd->add_option("--bootstrap", tr.exp.n_bootstrap, "Epoch-selection resamples")->capture_default_str();
  train_cmd->add_option("--pca-mode", tr.pca_mode, "joint | per_side")->capture_default_str();
  train_cmd->add_option("--ties", tr.ties, "optimistic | pessimistic")->capture_default_str();
  train_cmd->add_option("--jobs", tr.exp.jobs, "Concurrent runs")->capture_default_str();
  train_cmd->add_option("--model-label", tr.model_label, "Report 'model' column (default: from manifest)");
  train_cmd->add_option("--dataset-label", tr.dataset_label, "Report 'dataset' column (default: from manifest)");

  EvalOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Asymmetric recall of a dataset, optionally reduced and adapted");
  eval_cmd->add_option("--data", ev.data, "Dataset manifest")->required();
  eval_cmd->add_option("--pca", ev.pca, "PCA prefix written by reduce (e.g. dir/pca)");
  eval_cmd->add_option("--model", ev.model, "Model checkpoint prefix (e.g. run_000/model_sigma15)");
  eval_cmd->add_option("--ks", ev.ks)->capture_default_str();
  eval_cmd->add_option("--ties", ev.ties)->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Also write the result as JSON");

  std::string report_dir;
  std::string report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "Aggregate a results directory into report tables");
  report_cmd->add_option("--results", report_dir, "Results directory written by train")->required();
  report_cmd->add_option("--out", report_out, "Output directory (default: the results directory)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "simadapt " << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (auto* opt = sub->get_option_no_throw("--config"); opt && opt->count()) {
      apply_config_file(*sub, opt->as<std::string>());
    }
    if (sub == gen_cmd) return cmd_gen(*gen_cmd, gen, out);
    if (sub == reduce_cmd) return cmd_reduce(*reduce_cmd, reduce, out);
    if (sub == train_cmd) return cmd_train(*train_cmd, tr, out, err);
    if (sub == eval_cmd) return cmd_eval(ev, out);
    if (sub == report_cmd) return cmd_report(report_dir, report_out, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace simadapt
