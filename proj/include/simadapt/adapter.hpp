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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "simadapt/embedding_store.hpp"
#include "simadapt/error.hpp"
#include "simadapt/retrieval.hpp"
#include "simadapt/types.hpp"

namespace simadapt {

/// a = ReLU(W d), with W of shape out_dim x in_dim.
struct AdaptationModel {
  Matrix weights;
  std::uint64_t init_seed = 0;

  Index in_dim() const { return weights.cols(); }
  Index out_dim() const { return weights.rows(); }
};

/// Glorot-style Gaussian init: N(0, 2 / (in_dim + out_dim)).
AdaptationModel init_model(Index in_dim, Index out_dim, std::uint64_t seed);

/// Row i of the result is max(0, W d_i).
EmbeddingMatrix forward(const AdaptationModel& model, const EmbeddingMatrix& d);

// ---------------------------------------------------------------------------
// Cosine similarity

/// Rows scaled to unit norm; zero rows stay zero.
template <typename Derived>
MatrixT<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixT<Scalar> out = x;
  const VectorT<Scalar> norms = out.rowwise().norm();
  const VectorT<Scalar> inv = (norms.array() > Scalar(0)).select(norms.cwiseInverse(), Scalar(0));
  out.array().colwise() *= inv.array();
  return out;
}

/// S(i, j) = cos(left_i, right_j). A zero-norm row scores 0 against everything.
template <typename DerivedL, typename DerivedR>
MatrixT<typename DerivedL::Scalar> similarity_matrix(const Eigen::MatrixBase<DerivedL>& left,
                                                     const Eigen::MatrixBase<DerivedR>& right) {
  if (left.cols() != right.cols()) {
    throw Error(Errc::dimension_mismatch, "similarity: embeddings differ in width");
  }
  const auto l = normalize_rows(left);
  const auto r = normalize_rows(right);
  MatrixT<typename DerivedL::Scalar> s(l.rows(), r.rows());
  s.noalias() = l * r.transpose();
  return s;
}

// ---------------------------------------------------------------------------
// Bidirectional temperature-scaled cross-entropy

namespace detail {

/// Cross-entropy of softmax(temperature * column j) against target j, for
/// every column of a square matrix. Returns the mean loss and overwrites
/// `probs` with the column-wise softmax.
template <typename Scalar>
Scalar column_cross_entropy(const MatrixT<Scalar>& s, Scalar temperature, MatrixT<Scalar>& probs) {
  const Index n = s.cols();
  probs.resize(s.rows(), n);
  Scalar total(0);
  for (Index j = 0; j < n; ++j) {
    auto p = probs.col(j);
    const Scalar peak = temperature * s.col(j).maxCoeff();
    p = (temperature * s.col(j).array() - peak).exp().matrix();
    const Scalar target = temperature * s(j, j) - peak;
    const Scalar target_exp = p(j);
    // The off-target mass is summed on its own so that a dominant target
    // still yields log1p(tiny) > 0 rather than rounding to zero.
    p(j) = Scalar(0);
    const Scalar others = p.sum();
    p(j) = target_exp;
    total += target == Scalar(0) ? std::log1p(others) : std::log(target_exp + others) - target;
    p /= target_exp + others;
  }
  return total / static_cast<Scalar>(n);
}

}  // namespace detail

template <typename Scalar>
struct LossResult {
  Scalar value{};
  Scalar left_to_right{};
  Scalar right_to_left{};
  MatrixT<Scalar> grad;  // dL/dS
};

/// L = (L_left_to_right + L_right_to_left) / 2 with the identity as target.
///
/// L_left_to_right is the mean over rows i of -log softmax(t * S_i)[i]; the
/// reverse direction does the same over columns. The gradient of each
/// directed term is (t / n) * (softmax - identity) along its direction.
template <typename Derived>
LossResult<typename Derived::Scalar> contrastive_loss(const Eigen::MatrixBase<Derived>& s,
                                                      typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  if (s.rows() != s.cols() || s.rows() < 1) {
    throw Error(Errc::dimension_mismatch, "loss: similarity matrix must be square and non-empty");
  }
  if (!s.allFinite()) throw Error(Errc::non_finite, "loss: non-finite similarity");
  if (!(temperature > Scalar(0))) throw Error(Errc::invalid_argument, "loss: temperature must be positive");

  const MatrixT<Scalar> by_col = s;
  const MatrixT<Scalar> by_row = s.transpose();
  MatrixT<Scalar> col_probs;
  MatrixT<Scalar> row_probs_t;

  LossResult<Scalar> out;
  out.right_to_left = detail::column_cross_entropy(by_col, temperature, col_probs);
  out.left_to_right = detail::column_cross_entropy(by_row, temperature, row_probs_t);
  out.value = (out.left_to_right + out.right_to_left) / Scalar(2);

  const Scalar scale = temperature / (Scalar(2) * static_cast<Scalar>(s.rows()));
  out.grad = col_probs;
  out.grad += row_probs_t.transpose();
  out.grad.diagonal().array() -= Scalar(2);
  out.grad *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Training

enum class Optimizer { sgd, adam };

std::string to_string(Optimizer opt);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  double temperature = 15.0;
  Index epochs = 150;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Ranks at which test recall is recorded every epoch.
  std::vector<Index> eval_ks{1};
  /// Keep a copy of W every this many epochs (0: none). The final model is
  /// always returned separately.
  Index checkpoint_every = 0;
  TieRule ties = TieRule::optimistic;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;  // 0 is the untrained model
  double loss = 0.0;
  double train_ar1 = 0.0;
  double test_ar1 = 0.0;
  std::vector<double> test_recall;  // one entry per TrainConfig::eval_ks
};

struct TrainTrace {
  std::vector<Index> eval_ks;
  std::vector<EpochRecord> records;
  std::vector<std::pair<Index, Matrix>> checkpoints;
};

struct TrainResult {
  AdaptationModel model;
  TrainTrace trace;
};

/// Loss and dL/dW for one full batch.
struct LossAndGradient {
  double loss = 0.0;
  Matrix weights_grad;
  Matrix similarity;
};

LossAndGradient loss_and_gradient(const AdaptationModel& model, const EmbeddingMatrix& left,
                                  const EmbeddingMatrix& right, double temperature);

/// Full-batch training. Records epoch 0 (initial weights) through
/// cfg.epochs; each record holds the loss and recalls of the weights at that
/// point. `test` is optional; without it test fields are 0.
TrainResult train(const PairedDataset& train_set, const TrainConfig& cfg, AdaptationModel model,
                  const PairedDataset* test = nullptr);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  Index checked = 0;
  Index skipped_kinks = 0;
  /// All adapted vectors were zero: the loss is flat in W.
  bool flat = false;
};

/// Five-point central differences of the loss in W against the analytic
/// gradient on up to `max_entries` random entries. Entries whose stencil
/// (+-2 step) would carry a pre-activation across the ReLU kink are skipped.
GradientCheckResult gradient_check(const AdaptationModel& model, const PairedDataset& sample,
                                   double temperature, std::uint64_t seed, Index max_entries = 200,
                                   double step = 1e-3);

/// TrainTrace CSV: epoch,loss,train_ar1,test_ar1
void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

/// Checkpoint: <prefix>.emb holds W, <prefix>.json the metadata.
void save_model(const AdaptationModel& model, const std::filesystem::path& prefix,
                const std::string& config_hash = {});
AdaptationModel load_model(const std::filesystem::path& prefix);

}  // namespace simadapt
