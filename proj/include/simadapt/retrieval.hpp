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
#include <span>
#include <vector>

#include "simadapt/error.hpp"
#include "simadapt/types.hpp"

namespace simadapt {

struct TrainTrace;

/// How candidates scoring exactly as high as the ground truth are counted.
/// Optimistic ties never push the ground truth down.
enum class TieRule { optimistic, pessimistic };

/// 1-based rank of the ground-truth partner for every pair, in both query
/// directions.
struct RankResult {
  IndexList left_to_right;
  IndexList right_to_left;

  Index size() const { return static_cast<Index>(left_to_right.size()); }
};

/// Ranks from a square similarity matrix: S(i, j) scores left_i against right_j.
template <typename Derived>
RankResult rank_from_similarity(const Eigen::MatrixBase<Derived>& s, TieRule ties = TieRule::optimistic) {
  if (s.rows() != s.cols()) throw Error(Errc::dimension_mismatch, "ranking needs a square similarity matrix");
  const Index n = s.rows();
  RankResult r;
  r.left_to_right.assign(static_cast<std::size_t>(n), 1);
  r.right_to_left.assign(static_cast<std::size_t>(n), 1);
  const bool pessimistic = ties == TieRule::pessimistic;
  const VectorT<typename Derived::Scalar> diag = s.diagonal();
  for (Index j = 0; j < n; ++j) {
    const auto own = diag(j);
    Index above_col = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const auto v = s(i, j);
      // left_i's candidate right_j against right_i
      if (v > diag(i) || (pessimistic && v == diag(i))) ++r.left_to_right[static_cast<std::size_t>(i)];
      // right_j's candidate left_i against left_j
      if (v > own || (pessimistic && v == own)) ++above_col;
    }
    r.right_to_left[static_cast<std::size_t>(j)] += above_col;
  }
  return r;
}

/// Ranks under cosine similarity of two row-aligned embedding sets.
RankResult rank_pairs(const EmbeddingMatrix& left, const EmbeddingMatrix& right,
                      TieRule ties = TieRule::optimistic);

/// Fraction of pairs found within the top k in at least one direction.
double asymmetric_recall(const RankResult& ranks, Index k);

struct RecallPoint {
  Index k = 0;
  double recall = 0.0;
};

std::vector<RecallPoint> recall_curve(const RankResult& ranks, std::span<const Index> ks);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// Bootstrap over runs: each of `n_bootstrap` resamples (with replacement)
/// yields a mean test aR@1 per epoch; the epoch with the highest average
/// across resamples wins, earliest on ties.
Index select_epoch(std::span<const TrainTrace> traces, Index n_bootstrap, std::uint64_t seed);

}  // namespace simadapt
