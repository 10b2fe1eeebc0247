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

#include "simadapt/embedding_store.hpp"
#include "simadapt/retrieval.hpp"
#include "simadapt/synth.hpp"
#include "test_support.hpp"

using namespace simadapt;
using simadapt::testing::code_of;

TEST(Synth, SameSeedSameBytes) {
  auto cfg = synth_preset("tiny");
  cfg.seed = 42;
  const auto a = generate(cfg), b = generate(cfg);
  EXPECT_EQ(encode_emb1(a.left), encode_emb1(b.left));
  EXPECT_EQ(encode_emb1(a.right), encode_emb1(b.right));
  cfg.seed = 43;
  EXPECT_NE(encode_emb1(generate(cfg).left), encode_emb1(a.left));
}

TEST(Synth, RowsAreUnitNorm) {
  const auto ds = generate(synth_preset("tiny"));
  EXPECT_EQ(ds.size(), 200);
  EXPECT_EQ(ds.dim(), 32);
  for (Index i = 0; i < ds.size(); ++i) {
    EXPECT_NEAR(ds.left.row(i).norm(), 1.0, 1e-12);
    EXPECT_NEAR(ds.right.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(Synth, NoDistractorsNoNoiseGivesPerfectPairs) {
  auto cfg = synth_preset("tiny");
  cfg.semantic_strength = 0.0;
  cfg.noise_std = 0.0;
  const auto ds = generate(cfg);
  EXPECT_EQ(ds.left, ds.right);
  EXPECT_EQ(asymmetric_recall(rank_pairs(ds.left, ds.right), 1), 1.0);
}

TEST(Synth, BasisIsOrthonormal) {
  for (bool distinct : {false, true}) {
    SynthConfig cfg;
    cfg.distinct_visual_mixing = distinct;
    const auto b = make_basis(cfg);
    const Index v = cfg.visual_dim, s = cfg.semantic_dim;
    EXPECT_TRUE((b.visual_left.transpose() * b.visual_left).isApprox(Matrix::Identity(v, v), 1e-12));
    EXPECT_TRUE((b.visual_right.transpose() * b.visual_right).isApprox(Matrix::Identity(v, v), 1e-12));
    EXPECT_TRUE((b.semantic.transpose() * b.semantic).isApprox(Matrix::Identity(s, s), 1e-12));
    EXPECT_LT((b.visual_left.transpose() * b.semantic).norm(), 1e-12);
    EXPECT_LT((b.visual_right.transpose() * b.semantic).norm(), 1e-12);
    if (distinct) EXPECT_LT((b.visual_left.transpose() * b.visual_right).norm(), 1e-12);
    else EXPECT_EQ(b.visual_left, b.visual_right);
  }
}

TEST(Synth, OracleProjectorRecoversPairs) {
  // Project both sides on the planted shared subspace; the semantic part
  // vanishes and only the isotropic noise is left to confuse pairs.
  const SynthConfig cfg;
  const auto ds = generate(cfg);
  const auto b = make_basis(cfg);
  const EmbeddingMatrix l = ds.left * b.visual_left;
  const EmbeddingMatrix r = ds.right * b.visual_right;
  EXPECT_GE(asymmetric_recall(rank_pairs(l, r), 1), 0.95);
  // Raw features are dominated by the distractors.
  EXPECT_LT(asymmetric_recall(rank_pairs(ds.left, ds.right), 1), 0.15);
}

TEST(Synth, RawRecallFallsWithSemanticStrength) {
  double prev = 2.0;
  for (double rho : {0.0, 1.0, 4.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SynthConfig cfg;
      cfg.n_pairs = 500;
      cfg.semantic_strength = rho;
      cfg.seed = seed;
      const auto ds = generate(cfg);
      total += asymmetric_recall(rank_pairs(ds.left, ds.right), 1);
    }
    EXPECT_LT(total / 5.0, prev) << rho;
    prev = total / 5.0;
  }
}

TEST(Synth, InvalidConfigs) {
  SynthConfig cfg;
  cfg.ambient_dim = 70;  // 16 + 64 does not fit
  EXPECT_EQ(code_of([&] { generate(cfg); }), Errc::invalid_argument);
  cfg = {};
  cfg.semantic_strength = -1;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_argument);
  cfg = {};
  cfg.distinct_visual_mixing = true;
  cfg.ambient_dim = 90;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { synth_preset("huge"); }), Errc::invalid_argument);
}
