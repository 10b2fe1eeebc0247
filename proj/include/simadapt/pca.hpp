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

#include <filesystem>

#include "simadapt/types.hpp"

namespace simadapt {

/// Principal subspace of a descriptor set.
///
/// `components` holds one unit-norm principal direction per row, sorted by
/// decreasing explained variance. Each direction's sign is fixed so that its
/// largest-magnitude coordinate is positive (first such coordinate on ties),
/// which makes fits reproducible across eigen-solver implementations.
struct PcaModel {
  Vector mean;
  Matrix components;  // k x d
  Vector explained_variance;
  Vector explained_variance_ratio;

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return components.rows(); }
};

/// Above this input dimension `fit_pca` switches from a covariance
/// eigendecomposition to an SVD of the centered data.
inline constexpr Index kPcaCovarianceMaxDim = 4096;

/// Top-k principal components with the sample covariance (divisor n - 1).
/// Requires n >= 2 and 1 <= k <= min(n - 1, d).
PcaModel fit_pca(const EmbeddingMatrix& data, Index k);

/// Row i of the result is components * (row_i - mean).
EmbeddingMatrix transform(const PcaModel& model, const EmbeddingMatrix& data);

/// Maps reduced rows back to the input space: mean + components^T * y.
EmbeddingMatrix inverse_transform(const PcaModel& model, const EmbeddingMatrix& reduced);

/// Fraction of total variance kept by the model's components.
double variance_sum(const PcaModel& model);

/// Writes <prefix>.mean.emb, <prefix>.components.emb and <prefix>.json.
void save_pca(const PcaModel& model, const std::filesystem::path& prefix);
PcaModel load_pca(const std::filesystem::path& prefix);

}  // namespace simadapt
