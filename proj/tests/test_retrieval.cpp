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

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "simadapt/adapter.hpp"
#include "simadapt/retrieval.hpp"
#include "test_support.hpp"

using namespace simadapt;
using simadapt::testing::code_of;

namespace {

RankResult ranks_of(std::vector<std::pair<Index, Index>> pairs) {
  RankResult r;
  for (auto [a, b] : pairs) {
    r.left_to_right.push_back(a);
    r.right_to_left.push_back(b);
  }
  return r;
}

TrainTrace trace_of(const std::vector<double>& test_ar1, Index first_epoch = 0) {
  TrainTrace t;
  for (std::size_t e = 0; e < test_ar1.size(); ++e) {
    EpochRecord r;
    r.epoch = first_epoch + static_cast<Index>(e);
    r.test_ar1 = test_ar1[e];
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST(Recall, WorkedExample) {
  const auto r = ranks_of({{1, 2}, {3, 1}, {2, 2}});
  EXPECT_NEAR(asymmetric_recall(r, 1), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(asymmetric_recall(r, 2), 1.0);
  const std::vector<Index> ks{1, 2, 3};
  const auto curve = recall_curve(r, ks);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[2].k, 3);
  EXPECT_EQ(curve[2].recall, 1.0);
}

TEST(Recall, InvalidArguments) {
  const auto r = ranks_of({{1, 1}});
  EXPECT_EQ(code_of([&] { asymmetric_recall(r, 0); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { asymmetric_recall(RankResult{}, 1); }), Errc::invalid_argument);
  const std::vector<Index> unsorted{5, 1};
  EXPECT_EQ(code_of([&] { recall_curve(r, unsorted); }), Errc::invalid_argument);
}

TEST(Ranking, MatchesSortOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(60)), d = 1 + static_cast<Index>(rng.below(6));
    EmbeddingMatrix l = oracle::random_matrix(rng, n, d), r = oracle::random_matrix(rng, n, d);
    if (trial % 3 == 0) {
      // Quantized values produce exact ties.
      l = l.array().round();
      r = r.array().round();
    }
    const auto s = oracle::cosine_matrix(l, r);
    Matrix sm(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) sm(i, j) = s[i][j];
    for (bool pess : {false, true}) {
      const auto got = rank_from_similarity(sm, pess ? TieRule::pessimistic : TieRule::optimistic);
      const auto want = oracle::brute_force_ranks(s, pess);
      EXPECT_EQ(got.left_to_right, want.l2r);
      EXPECT_EQ(got.right_to_left, want.r2l);
      for (Index k : {Index{1}, Index{5}, n})
        EXPECT_EQ(asymmetric_recall(got, k), oracle::brute_force_recall(want, k));
    }
  }
}

TEST(Ranking, TiesAllOptimisticOrAllPessimistic) {
  const Matrix s = Matrix::Constant(4, 4, 0.5);
  const auto opt = rank_from_similarity(s);
  const auto pes = rank_from_similarity(s, TieRule::pessimistic);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_EQ(opt.left_to_right[i], 1);
    EXPECT_EQ(pes.left_to_right[i], 4);
  }
}

TEST(Ranking, RecallIsMonotoneAndReachesOne) {
  Rng rng(13);
  const Index n = 80;
  const auto ranks = rank_pairs(oracle::random_matrix(rng, n, 5), oracle::random_matrix(rng, n, 5));
  double prev = 0.0;
  for (Index k = 1; k <= n; ++k) {
    const double v = asymmetric_recall(ranks, k);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_EQ(asymmetric_recall(ranks, n), 1.0);
}

TEST(Ranking, ShapeMismatch) {
  EXPECT_EQ(code_of([] { rank_from_similarity(Matrix::Zero(2, 3)); }), Errc::dimension_mismatch);
  EXPECT_EQ(code_of([] { rank_pairs(EmbeddingMatrix::Ones(2, 3), EmbeddingMatrix::Ones(3, 3)); }),
            Errc::dimension_mismatch);
}

TEST(MeanStdTest, SampleStatistics) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one{7};
  EXPECT_EQ(mean_std(one).stddev, 0.0);
}

TEST(SelectEpoch, SingleRunPicksArgmax) {
  const std::vector<TrainTrace> t{trace_of({0.1, 0.4, 0.3, 0.4})};
  EXPECT_EQ(select_epoch(t, 50, 1), 1);  // earliest of the tied maxima
}

TEST(SelectEpoch, IdenticalRunsIgnoreResampling) {
  const std::vector<TrainTrace> t(5, trace_of({0.2, 0.1, 0.5, 0.45}, 3));
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_EQ(select_epoch(t, 20, seed), 5);
}

TEST(SelectEpoch, MatchesBootstrapOracle) {
  Rng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t runs = 1 + rng.below(6), epochs = 1 + rng.below(12);
    std::vector<TrainTrace> traces;
    std::vector<std::vector<double>> table;
    std::vector<Index> epoch_ids;
    for (std::size_t e = 0; e < epochs; ++e) epoch_ids.push_back(static_cast<Index>(e));
    for (std::size_t r = 0; r < runs; ++r) {
      std::vector<double> row;
      // Values on a coarse grid so that ties occur.
      for (std::size_t e = 0; e < epochs; ++e) row.push_back(static_cast<double>(rng.below(5)) / 4.0);
      traces.push_back(trace_of(row));
      table.push_back(row);
    }
    const Index b = 1 + static_cast<Index>(rng.below(40));
    EXPECT_EQ(select_epoch(traces, b, trial), oracle::bootstrap_epoch(table, epoch_ids, b, trial));
  }
}

TEST(SelectEpoch, RejectsMismatchedTraces) {
  const std::vector<TrainTrace> t{trace_of({0.1, 0.2}), trace_of({0.1})};
  EXPECT_EQ(code_of([&] { select_epoch(t, 10, 0); }), Errc::dimension_mismatch);
  EXPECT_EQ(code_of([] { select_epoch({}, 10, 0); }), Errc::invalid_argument);
}
