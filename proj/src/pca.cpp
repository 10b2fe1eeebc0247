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

#include "simadapt/pca.hpp"

#include <fstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "simadapt/embedding_store.hpp"
#include "simadapt/error.hpp"

namespace simadapt {

namespace fs = std::filesystem;

namespace {

void canonicalize_signs(Matrix& components) {
  for (Index r = 0; r < components.rows(); ++r) {
    Index arg = 0;
    components.row(r).cwiseAbs().maxCoeff(&arg);
    if (components(r, arg) < 0.0) components.row(r) *= -1.0;
  }
}

}  // namespace

PcaModel fit_pca(const EmbeddingMatrix& data, Index k) {
  check_embedding(data, "PCA input");
  const Index n = data.rows();
  const Index d = data.cols();
  if (n < 2) throw Error(Errc::invalid_argument, "PCA needs at least two rows");
  if (k < 1 || k > std::min(n - 1, d)) {
    throw Error(Errc::invalid_argument, "PCA: k must lie in [1, min(n - 1, d)]");
  }

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const double total = centered.squaredNorm() / denom;
  if (!(total > 0.0)) throw Error(Errc::degenerate_data, "PCA: zero total variance");

  if (d <= kPcaCovarianceMaxDim) {
    Matrix cov = Matrix::Zero(d, d);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / denom);
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw Error(Errc::degenerate_data, "PCA: eigensolver failed");
    // Eigenvalues come back ascending.
    model.components = eig.eigenvectors().rightCols(k).rowwise().reverse().transpose();
    model.explained_variance = eig.eigenvalues().tail(k).reverse();
  } else {
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    model.components = svd.matrixV().leftCols(k).transpose();
    model.explained_variance = svd.singularValues().head(k).array().square() / denom;
  }
  model.explained_variance = model.explained_variance.cwiseMax(0.0);
  model.explained_variance_ratio = model.explained_variance / total;
  canonicalize_signs(model.components);
  return model;
}

EmbeddingMatrix transform(const PcaModel& model, const EmbeddingMatrix& data) {
  if (data.cols() != model.input_dim()) {
    throw Error(Errc::dimension_mismatch, "PCA transform: input dimension does not match model");
  }
  EmbeddingMatrix out(data.rows(), model.output_dim());
  out.noalias() = (data.rowwise() - model.mean.transpose()) * model.components.transpose();
  return out;
}

EmbeddingMatrix inverse_transform(const PcaModel& model, const EmbeddingMatrix& reduced) {
  if (reduced.cols() != model.output_dim()) {
    throw Error(Errc::dimension_mismatch, "PCA inverse transform: dimension does not match model");
  }
  EmbeddingMatrix out = reduced * model.components;
  out.rowwise() += model.mean.transpose();
  return out;
}

double variance_sum(const PcaModel& model) { return model.explained_variance_ratio.sum(); }

void save_pca(const PcaModel& model, const fs::path& prefix) {
  const fs::path mean_path = prefix.string() + ".mean.emb";
  const fs::path comp_path = prefix.string() + ".components.emb";
  save_emb1(model.mean.transpose(), mean_path);
  save_emb1(model.components, comp_path);

  nlohmann::ordered_json meta;
  meta["input_dim"] = model.input_dim();
  meta["output_dim"] = model.output_dim();
  meta["mean"] = mean_path.filename().string();
  meta["components"] = comp_path.filename().string();
  meta["explained_variance"] =
      std::vector<double>(model.explained_variance.begin(), model.explained_variance.end());
  meta["explained_variance_ratio"] =
      std::vector<double>(model.explained_variance_ratio.begin(), model.explained_variance_ratio.end());
  const fs::path meta_path = prefix.string() + ".json";
  std::ofstream out(meta_path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + meta_path.string());
  out << meta.dump(2) << '\n';
}

PcaModel load_pca(const fs::path& prefix) {
  const fs::path meta_path = prefix.string() + ".json";
  std::ifstream in(meta_path);
  if (!in) throw Error(Errc::not_found, "PCA sidecar not found: " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("malformed PCA sidecar: ") + e.what());
  }
  const auto dir = meta_path.parent_path();
  PcaModel model;
  const EmbeddingMatrix mean = load_emb1(dir / meta.at("mean").get<std::string>());
  model.mean = mean.row(0).transpose();
  model.components = load_emb1(dir / meta.at("components").get<std::string>());
  const auto ev = meta.at("explained_variance").get<std::vector<double>>();
  const auto ratio = meta.at("explained_variance_ratio").get<std::vector<double>>();
  model.explained_variance = Eigen::Map<const Vector>(ev.data(), static_cast<Index>(ev.size()));
  model.explained_variance_ratio = Eigen::Map<const Vector>(ratio.data(), static_cast<Index>(ratio.size()));
  if (mean.rows() != 1 || model.components.cols() != model.input_dim() ||
      model.explained_variance.size() != model.output_dim() ||
      model.explained_variance_ratio.size() != model.output_dim()) {
    throw Error(Errc::bad_header, "PCA files are inconsistent");
  }
  return model;
}

}  // namespace simadapt
