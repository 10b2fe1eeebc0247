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

#include "simadapt/synth.hpp"

#include <cmath>

#include <Eigen/QR>

#include "simadapt/error.hpp"
#include "simadapt/random.hpp"

namespace simadapt {

void SynthConfig::validate() const {
  if (n_pairs < 1 || visual_dim < 1 || semantic_dim < 1 || ambient_dim < 1) {
    throw Error(Errc::invalid_argument, "synth: all dimensions must be >= 1");
  }
  const Index used = visual_dim * (distinct_visual_mixing ? 2 : 1) + semantic_dim;
  if (used > ambient_dim) throw Error(Errc::invalid_argument, "synth: subspaces do not fit in the ambient dimension");
  if (!(semantic_strength >= 0.0) || !(noise_std >= 0.0)) {
    throw Error(Errc::invalid_argument, "synth: strength and noise must be >= 0");
  }
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig cfg;
  if (name == "default") return cfg;
  if (name == "tiny") {
    cfg.n_pairs = 200;
    cfg.visual_dim = 4;
    cfg.semantic_dim = 16;
    cfg.ambient_dim = 32;
    return cfg;
  }
  throw Error(Errc::invalid_argument, "unknown synth preset: " + name);
}

SynthBasis make_basis(const SynthConfig& cfg) {
  cfg.validate();
  const Index d = cfg.ambient_dim;
  Rng rng(cfg.seed);
  Matrix gaussian(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) gaussian(i, j) = rng.normal();
  }
  const Eigen::HouseholderQR<Matrix> qr(gaussian);
  const Matrix q = qr.householderQ();

  SynthBasis basis;
  basis.visual_left = q.leftCols(cfg.visual_dim);
  basis.semantic = q.middleCols(cfg.visual_dim, cfg.semantic_dim);
  basis.visual_right = cfg.distinct_visual_mixing
                           ? Matrix(q.middleCols(cfg.visual_dim + cfg.semantic_dim, cfg.visual_dim))
                           : basis.visual_left;
  return basis;
}

PairedDataset generate(const SynthConfig& cfg) {
  const SynthBasis basis = make_basis(cfg);
  const Index n = cfg.n_pairs;
  const Index d = cfg.ambient_dim;

  // Stream distinct from the one that built the basis.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto gaussian = [&](Index rows, Index cols, double stddev) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
    }
    return m;
  };
  const Matrix visual = gaussian(n, cfg.visual_dim, 1.0 / std::sqrt(static_cast<double>(cfg.visual_dim)));
  const double sem_std = 1.0 / std::sqrt(static_cast<double>(cfg.semantic_dim));
  const Matrix semantic_left = gaussian(n, cfg.semantic_dim, sem_std);
  const Matrix semantic_right = gaussian(n, cfg.semantic_dim, sem_std);
  const Matrix noise_left = gaussian(n, d, cfg.noise_std);
  const Matrix noise_right = gaussian(n, d, cfg.noise_std);

  const double rho = cfg.semantic_strength;
  PairedDataset ds;
  ds.left = visual * basis.visual_left.transpose() + rho * semantic_left * basis.semantic.transpose() + noise_left;
  ds.right = visual * basis.visual_right.transpose() + rho * semantic_right * basis.semantic.transpose() + noise_right;
  for (EmbeddingMatrix* side : {&ds.left, &ds.right}) {
    for (Index i = 0; i < n; ++i) {
      const double norm = side->row(i).norm();
      if (norm > 0.0) side->row(i) /= norm;
    }
  }
  ds.pair_ids = sequential_pair_ids(n);
  return ds;
}

}  // namespace simadapt
