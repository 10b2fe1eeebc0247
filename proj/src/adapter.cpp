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

#include "simadapt/adapter.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "simadapt/random.hpp"
#include "simadapt/retrieval.hpp"

namespace simadapt {

namespace fs = std::filesystem;

AdaptationModel init_model(Index in_dim, Index out_dim, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) throw Error(Errc::invalid_argument, "model dimensions must be >= 1");
  AdaptationModel model;
  model.init_seed = seed;
  model.weights.resize(out_dim, in_dim);
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim + out_dim));
  Rng rng(seed);
  // Row-major fill so the draw order does not depend on storage order.
  for (Index o = 0; o < out_dim; ++o) {
    for (Index i = 0; i < in_dim; ++i) model.weights(o, i) = stddev * rng.normal();
  }
  return model;
}

EmbeddingMatrix forward(const AdaptationModel& model, const EmbeddingMatrix& d) {
  if (d.cols() != model.in_dim()) {
    throw Error(Errc::dimension_mismatch, "forward: input width does not match the model");
  }
  EmbeddingMatrix a(d.rows(), model.out_dim());
  a.noalias() = d * model.weights.transpose();
  return a.cwiseMax(0.0);
}

std::string to_string(Optimizer opt) { return opt == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw Error(Errc::invalid_argument, "unknown optimizer: " + name);
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw Error(Errc::invalid_argument, "temperature must be > 0");
  if (epochs < 1) throw Error(Errc::invalid_argument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be > 0");
  if (eval_ks.empty() || !std::is_sorted(eval_ks.begin(), eval_ks.end()) || eval_ks.front() < 1) {
    throw Error(Errc::invalid_argument, "eval ranks must be sorted and >= 1");
  }
  if (checkpoint_every < 0) throw Error(Errc::invalid_argument, "checkpoint interval must be >= 0");
}

// ---------------------------------------------------------------------------

namespace {

/// Activations of one side kept for the backward pass.
struct SideActivations {
  Matrix pre;    // X W^T
  Matrix unit;   // ReLU(pre), rows normalized (zero rows stay zero)
  Vector norms;  // row norms of ReLU(pre)
};

SideActivations activate(const Matrix& weights, const EmbeddingMatrix& x) {
  SideActivations s;
  s.pre.noalias() = x * weights.transpose();
  s.unit = s.pre.cwiseMax(0.0);
  s.norms = s.unit.rowwise().norm();
  const Vector inv = (s.norms.array() > 0.0).select(s.norms.cwiseInverse(), 0.0);
  s.unit.array().colwise() *= inv.array();
  return s;
}

/// Pulls dL/d(unit rows) back to dL/d(pre-activations), in place.
void backprop_side(const SideActivations& s, Matrix& grad) {
  // d(a / |a|) / da = (I - u u^T) / |a|; rows with |a| = 0 get no gradient.
  const Vector radial = s.unit.cwiseProduct(grad).rowwise().sum();
  const Vector inv = (s.norms.array() > 0.0).select(s.norms.cwiseInverse(), 0.0);
  grad.array() -= s.unit.array().colwise() * radial.array();
  grad.array().colwise() *= inv.array();
  // ReLU; the subgradient at 0 is 0.
  grad = (s.pre.array() > 0.0).select(grad, 0.0);
}

}  // namespace

LossAndGradient loss_and_gradient(const AdaptationModel& model, const EmbeddingMatrix& left,
                                  const EmbeddingMatrix& right, double temperature) {
  if (left.rows() != right.rows()) throw Error(Errc::dimension_mismatch, "left/right row counts differ");
  if (left.cols() != model.in_dim() || right.cols() != model.in_dim()) {
    throw Error(Errc::dimension_mismatch, "input width does not match the model");
  }
  const SideActivations l = activate(model.weights, left);
  const SideActivations r = activate(model.weights, right);

  LossAndGradient out;
  out.similarity.noalias() = l.unit * r.unit.transpose();
  const auto loss = contrastive_loss(out.similarity, temperature);
  out.loss = loss.value;

  Matrix grad_left;
  grad_left.noalias() = loss.grad * r.unit;
  Matrix grad_right;
  grad_right.noalias() = loss.grad.transpose() * l.unit;
  backprop_side(l, grad_left);
  backprop_side(r, grad_right);

  out.weights_grad.noalias() = grad_left.transpose() * left;
  out.weights_grad.noalias() += grad_right.transpose() * right;
  return out;
}

TrainResult train(const PairedDataset& train_set, const TrainConfig& cfg, AdaptationModel model,
                  const PairedDataset* test) {
  cfg.validate();
  check_dataset(train_set);
  if (train_set.dim() != model.in_dim()) {
    throw Error(Errc::dimension_mismatch, "training data width does not match the model");
  }
  if (test) {
    check_dataset(*test);
    if (test->dim() != model.in_dim()) throw Error(Errc::dimension_mismatch, "test data width does not match the model");
  }

  TrainResult result;
  result.trace.eval_ks = cfg.eval_ks;
  result.trace.records.reserve(static_cast<std::size_t>(cfg.epochs + 1));

  Matrix first_moment = Matrix::Zero(model.out_dim(), model.in_dim());
  Matrix second_moment = Matrix::Zero(model.out_dim(), model.in_dim());
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  for (Index epoch = 0; epoch <= cfg.epochs; ++epoch) {
    LossAndGradient step;
    try {
      step = loss_and_gradient(model, train_set.left, train_set.right, cfg.temperature);
    } catch (const Error& e) {
      // Finite but huge weights overflow in the forward pass.
      if (e.code() != Errc::non_finite) throw;
      throw Error(Errc::divergence, "divergence at epoch " + std::to_string(epoch));
    }
    if (!std::isfinite(step.loss) || !step.weights_grad.allFinite()) {
      throw Error(Errc::divergence, "divergence at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = step.loss;
    rec.train_ar1 = asymmetric_recall(rank_from_similarity(step.similarity, cfg.ties), 1);
    rec.test_recall.assign(cfg.eval_ks.size(), 0.0);
    if (test) {
      const RankResult ranks = rank_pairs(forward(model, test->left), forward(model, test->right), cfg.ties);
      rec.test_ar1 = asymmetric_recall(ranks, 1);
      for (std::size_t i = 0; i < cfg.eval_ks.size(); ++i) {
        rec.test_recall[i] = asymmetric_recall(ranks, cfg.eval_ks[i]);
      }
    }
    result.trace.records.push_back(std::move(rec));
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      result.trace.checkpoints.emplace_back(epoch, model.weights);
    }
    if (epoch == cfg.epochs) break;

    if (cfg.optimizer == Optimizer::sgd) {
      model.weights -= cfg.learning_rate * step.weights_grad;
    } else {
      beta1_power *= cfg.adam_beta1;
      beta2_power *= cfg.adam_beta2;
      first_moment = cfg.adam_beta1 * first_moment + (1.0 - cfg.adam_beta1) * step.weights_grad;
      second_moment = cfg.adam_beta2 * second_moment +
                      (1.0 - cfg.adam_beta2) * step.weights_grad.cwiseAbs2();
      const double lr = cfg.learning_rate / (1.0 - beta1_power);
      const double bias2 = 1.0 - beta2_power;
      model.weights.array() -=
          lr * first_moment.array() / ((second_moment.array() / bias2).sqrt() + cfg.adam_epsilon);
    }
    if (!model.weights.allFinite()) {
      throw Error(Errc::divergence, "divergence at epoch " + std::to_string(epoch + 1));
    }
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------

GradientCheckResult gradient_check(const AdaptationModel& model, const PairedDataset& sample,
                                   double temperature, std::uint64_t seed, Index max_entries,
                                   double step) {
  const LossAndGradient analytic = loss_and_gradient(model, sample.left, sample.right, temperature);
  GradientCheckResult result;

  const Matrix pre_left = sample.left * model.weights.transpose();
  const Matrix pre_right = sample.right * model.weights.transpose();
  if ((pre_left.array() <= 0.0).all() && (pre_right.array() <= 0.0).all()) {
    result.flat = true;
    return result;
  }

  const Index total = model.weights.size();
  IndexList entries(static_cast<std::size_t>(total));
  std::iota(entries.begin(), entries.end(), Index{0});
  Rng rng(seed);
  for (std::size_t i = entries.size() - 1; i > 0; --i) std::swap(entries[i], entries[rng.below(i + 1)]);
  entries.resize(static_cast<std::size_t>(std::min(total, max_entries)));

  // Pre-activation of unit o moves by delta * x(i, c) when W(o, c) does;
  // the stencil reaches 2 * step.
  auto crosses_kink = [&](const Matrix& pre, const EmbeddingMatrix& x, Index o, Index c) {
    for (Index i = 0; i < x.rows(); ++i) {
      if (std::abs(pre(i, o)) <= 2.0 * step * std::abs(x(i, c))) return true;
    }
    return false;
  };
  AdaptationModel probe = model;
  auto loss_at = [&](Index o, Index c, double delta) {
    probe.weights(o, c) = model.weights(o, c) + delta;
    const double v = contrastive_loss(similarity_matrix(forward(probe, sample.left), forward(probe, sample.right)),
                                      temperature).value;
    probe.weights(o, c) = model.weights(o, c);
    return v;
  };

  for (Index flat_index : entries) {
    const Index o = flat_index / model.in_dim();
    const Index c = flat_index % model.in_dim();
    if (crosses_kink(pre_left, sample.left, o, c) || crosses_kink(pre_right, sample.right, o, c)) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (8.0 * (loss_at(o, c, step) - loss_at(o, c, -step)) -
                            (loss_at(o, c, 2.0 * step) - loss_at(o, c, -2.0 * step))) / (12.0 * step);
    const double exact = analytic.weights_grad(o, c);
    const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - exact) / scale);
    ++result.checked;
  }
  return result;
}

// ---------------------------------------------------------------------------

void write_trace_csv(const TrainTrace& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + path.string());
  out << "epoch,loss,train_ar1,test_ar1\n";
  char buf[128];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(r.epoch), r.loss,
                  r.train_ar1, r.test_ar1);
    out << buf;
  }
}

void save_model(const AdaptationModel& model, const fs::path& prefix, const std::string& config_hash) {
  const fs::path weights_path = prefix.string() + ".emb";
  save_emb1(model.weights, weights_path);
  nlohmann::ordered_json meta;
  meta["weights"] = weights_path.filename().string();
  meta["in_dim"] = model.in_dim();
  meta["out_dim"] = model.out_dim();
  meta["seed"] = model.init_seed;
  meta["config_hash"] = config_hash;
  const fs::path meta_path = prefix.string() + ".json";
  std::ofstream out(meta_path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + meta_path.string());
  out << meta.dump(2) << '\n';
}

AdaptationModel load_model(const fs::path& prefix) {
  const fs::path meta_path = prefix.string() + ".json";
  std::ifstream in(meta_path);
  if (!in) throw Error(Errc::not_found, "model sidecar not found: " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("malformed model sidecar: ") + e.what());
  }
  AdaptationModel model;
  model.weights = load_emb1(meta_path.parent_path() / meta.at("weights").get<std::string>());
  model.init_seed = meta.value("seed", std::uint64_t{0});
  if (model.in_dim() != meta.at("in_dim").get<Index>() || model.out_dim() != meta.at("out_dim").get<Index>()) {
    throw Error(Errc::bad_header, "model weights do not match the sidecar dimensions");
  }
  return model;
}

}  // namespace simadapt
