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

#include "simadapt/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simadapt/adapter.hpp"
#include "simadapt/random.hpp"

namespace simadapt {

RankResult rank_pairs(const EmbeddingMatrix& left, const EmbeddingMatrix& right, TieRule ties) {
  if (left.rows() != right.rows() || left.rows() < 1) {
    throw Error(Errc::dimension_mismatch, "ranking needs equal, non-zero row counts");
  }
  return rank_from_similarity(similarity_matrix(left, right), ties);
}

double asymmetric_recall(const RankResult& ranks, Index k) {
  if (k < 1) throw Error(Errc::invalid_argument, "recall rank k must be >= 1");
  if (ranks.size() == 0) throw Error(Errc::invalid_argument, "no ranks");
  Index hits = 0;
  for (std::size_t i = 0; i < ranks.left_to_right.size(); ++i) {
    if (std::min(ranks.left_to_right[i], ranks.right_to_left[i]) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<RecallPoint> recall_curve(const RankResult& ranks, std::span<const Index> ks) {
  if (!std::is_sorted(ks.begin(), ks.end())) throw Error(Errc::invalid_argument, "recall ranks must be sorted");
  std::vector<RecallPoint> curve;
  curve.reserve(ks.size());
  for (Index k : ks) curve.push_back({k, asymmetric_recall(ranks, k)});
  return curve;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::invalid_argument, "mean of an empty set");
  const double n = static_cast<double>(values.size());
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

Index select_epoch(std::span<const TrainTrace> traces, Index n_bootstrap, std::uint64_t seed) {
  if (traces.empty()) throw Error(Errc::invalid_argument, "epoch selection needs at least one trace");
  if (n_bootstrap < 1) throw Error(Errc::invalid_argument, "epoch selection needs n_bootstrap >= 1");
  const auto& first = traces.front().records;
  if (first.empty()) throw Error(Errc::invalid_argument, "epoch selection: empty trace");
  for (const auto& t : traces) {
    if (t.records.size() != first.size()) {
      throw Error(Errc::dimension_mismatch, "epoch selection: traces cover different epoch ranges");
    }
    for (std::size_t e = 0; e < first.size(); ++e) {
      if (t.records[e].epoch != first[e].epoch) {
        throw Error(Errc::dimension_mismatch, "epoch selection: traces cover different epoch ranges");
      }
    }
  }

  const std::size_t n_runs = traces.size();
  const std::size_t n_epochs = first.size();
  std::vector<double> score(n_epochs, 0.0);
  std::vector<double> resample_sum(n_epochs);
  Rng rng(seed);
  for (Index b = 0; b < n_bootstrap; ++b) {
    std::fill(resample_sum.begin(), resample_sum.end(), 0.0);
    for (std::size_t draw = 0; draw < n_runs; ++draw) {
      const auto& records = traces[rng.below(n_runs)].records;
      for (std::size_t e = 0; e < n_epochs; ++e) resample_sum[e] += records[e].test_ar1;
    }
    for (std::size_t e = 0; e < n_epochs; ++e) score[e] += resample_sum[e] / static_cast<double>(n_runs);
  }

  std::size_t best = 0;
  for (std::size_t e = 1; e < n_epochs; ++e) {
    if (score[e] > score[best]) best = e;
  }
  return first[best].epoch;
}

}  // namespace simadapt
