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
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "test_support.hpp"
#include "simadapt/embedding_store.hpp"
#include "simadapt/error.hpp"

using namespace simadapt;
using simadapt::testing::code_of;
using simadapt::testing::scratch;

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST(Pooling, SpatialMeanPerChannel) {
  // 2x2 map, 2 channels
  FeatureMapStack stack;
  stack.layers.push_back(make_feature_map(2, 2, 2, {1, 2, 3, 4, 10, 10, 10, 10}));
  const auto pooled = pool_spatial(stack);
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_DOUBLE_EQ(pooled[0](0), 2.5);
  EXPECT_DOUBLE_EQ(pooled[0](1), 10.0);
}

TEST(Pooling, EmptyStackRejected) {
  EXPECT_EQ(code_of([] { pool_spatial(FeatureMapStack{}); }), Errc::invalid_argument);
}

TEST(Normalize, UnitLengthAndZeroRejected) {
  Vector v(2);
  v << 3, 4;
  const Vector n = l2_normalize(v);
  EXPECT_DOUBLE_EQ(n(0), 0.6);
  EXPECT_DOUBLE_EQ(n(1), 0.8);
  EXPECT_EQ(code_of([] { l2_normalize(Vector::Zero(3)); }), Errc::invalid_argument);
}

TEST(Describe, NormIsSqrtOfLayerCount) {
  Rng rng(3);
  for (int layers = 1; layers <= 5; ++layers) {
    FeatureMapStack stack;
    for (int l = 0; l < layers; ++l) {
      const Index h = 1 + static_cast<Index>(rng.below(4)), w = 1 + static_cast<Index>(rng.below(4));
      const Index c = 1 + static_cast<Index>(rng.below(8));
      std::vector<double> data(static_cast<std::size_t>(h * w * c));
      for (auto& x : data) x = std::abs(rng.normal()) + 0.01;
      stack.layers.push_back(make_feature_map(h, w, c, data));
    }
    const Vector d = describe(stack);
    EXPECT_NEAR(d.norm(), std::sqrt(static_cast<double>(layers)), 1e-12);
    EXPECT_NEAR(describe(stack, true).norm(), 1.0, 1e-12);
  }
}

TEST(Describe, ConcatKeepsLayerOrder) {
  Vector a(1), b(2);
  a << 1;
  b << 2, 3;
  const Vector c = concat_layers({a, b});
  ASSERT_EQ(c.size(), 3);
  EXPECT_EQ(c(0), 1);
  EXPECT_EQ(c(2), 3);
}

TEST(Split, PartitionsAllPairs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index n = 4 + static_cast<Index>(seed * 37 % 250);
    const auto s = split_pairs(n, 0.75, seed);
    EXPECT_EQ(static_cast<Index>(s.train.size()), static_cast<Index>(std::floor(0.75 * n)));
    std::set<Index> seen(s.train.begin(), s.train.end());
    seen.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(static_cast<Index>(seen.size()), n);
    EXPECT_EQ(s.train.size() + s.test.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(*seen.begin(), 0);
    EXPECT_EQ(*seen.rbegin(), n - 1);
  }
}

TEST(Split, DeterministicPerSeed) {
  const auto a = split_pairs(100, 0.5, 9), b = split_pairs(100, 0.5, 9), c = split_pairs(100, 0.5, 10);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, BadFractionRejected) {
  EXPECT_EQ(code_of([] { split_pairs(10, 1.5, 0); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { split_pairs(10, -0.1, 0); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { split_pairs(1, 0.75, 0); }), Errc::invalid_argument);
}

TEST(Dataset, SubsetKeepsPairing) {
  PairedDataset ds;
  ds.left = EmbeddingMatrix::Identity(4, 4);
  ds.right = 2.0 * EmbeddingMatrix::Identity(4, 4);
  ds.pair_ids = sequential_pair_ids(4);
  EXPECT_EQ(ds.pair_ids[3], "pair_000003");
  const auto s = subset(ds, {2, 0});
  EXPECT_EQ(s.pair_ids[0], "pair_000002");
  EXPECT_EQ(s.left(0, 2), 1.0);
  EXPECT_EQ(s.right(1, 0), 2.0);
}

TEST(Dataset, DuplicateIdsRejected) {
  PairedDataset ds;
  ds.left = EmbeddingMatrix::Ones(2, 3);
  ds.right = EmbeddingMatrix::Ones(2, 3);
  ds.pair_ids = {"a", "a"};
  EXPECT_EQ(code_of([&] { check_dataset(ds); }), Errc::invalid_argument);
  ds.pair_ids = {"a", "b"};
  ds.right = EmbeddingMatrix::Ones(2, 4);
  EXPECT_EQ(code_of([&] { check_dataset(ds); }), Errc::dimension_mismatch);
}

TEST(Emb1, SingleValueFileIsTwentyBytes) {
  EmbeddingMatrix m(1, 1);
  m(0, 0) = 1.0;
  const auto bytes = encode_emb1(m);
  ASSERT_EQ(bytes.size(), 20u);
  EXPECT_EQ(std::memcmp(bytes.data(), "EMB1", 4), 0);
  const std::vector<std::uint8_t> expected_tail{1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f};
  EXPECT_TRUE(std::equal(expected_tail.begin(), expected_tail.end(), bytes.begin() + 4));
}

TEST(Emb1, RoundTripIsFloat32Exact) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Index r = 1 + static_cast<Index>(rng.below(20)), c = 1 + static_cast<Index>(rng.below(20));
    const EmbeddingMatrix m = oracle::random_matrix(rng, r, c);
    const EmbeddingMatrix back = decode_emb1(encode_emb1(m));
    ASSERT_EQ(back.rows(), r);
    ASSERT_EQ(back.cols(), c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) EXPECT_EQ(back(i, j), static_cast<double>(static_cast<float>(m(i, j))));
    EXPECT_EQ(encode_emb1(back), encode_emb1(m));
  }
}

TEST(Emb1, MalformedInputs) {
  EmbeddingMatrix m = EmbeddingMatrix::Ones(2, 3);
  const auto good = encode_emb1(m);

  auto bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_EQ(code_of([&] { decode_emb1(bad_magic); }), Errc::bad_magic);

  auto short_payload = good;
  short_payload.pop_back();
  EXPECT_EQ(code_of([&] { decode_emb1(short_payload); }), Errc::truncated);

  const std::vector<std::uint8_t> header_only(good.begin(), good.begin() + 10);
  EXPECT_EQ(code_of([&] { decode_emb1(header_only); }), Errc::truncated);

  auto reserved = good;
  reserved[12] = 1;
  EXPECT_EQ(code_of([&] { decode_emb1(reserved); }), Errc::bad_header);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(code_of([&] { decode_emb1(trailing); }), Errc::bad_header);

  auto zero_rows = good;
  put_u32(zero_rows, 4, 0);
  EXPECT_EQ(code_of([&] { decode_emb1(zero_rows); }), Errc::bad_header);

  auto huge = good;
  put_u32(huge, 4, 0xffffffffu);
  put_u32(huge, 8, 0xffffffffu);
  EXPECT_EQ(code_of([&] { decode_emb1(huge); }), Errc::dimension_overflow);
  EXPECT_EQ(code_of([&] { decode_emb1(good, Emb1ReadOptions{5}); }), Errc::dimension_overflow);

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + kEmb1HeaderSize, &q, 4);
  EXPECT_EQ(code_of([&] { decode_emb1(nan); }), Errc::non_finite);
}

TEST(Emb1, MissingFileIsNotFound) {
  EXPECT_EQ(code_of([] { load_emb1("/nonexistent/simadapt/x.emb"); }), Errc::not_found);
}

TEST(Manifest, RoundTripWithLabels) {
  const auto dir = scratch("manifest");
  PairedDataset ds;
  Rng rng(1);
  ds.left = oracle::random_matrix(rng, 5, 3);
  ds.right = oracle::random_matrix(rng, 5, 3);
  ds.pair_ids = sequential_pair_ids(5);
  const auto manifest = save_dataset(ds, dir, {"vgg", "shapes"});

  std::ifstream in(manifest);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("left"), "left.emb");
  EXPECT_EQ(j.at("pair_ids").size(), 5u);

  DatasetLabels labels;
  const auto back = load_dataset(manifest, &labels);
  EXPECT_EQ(labels.model, "vgg");
  EXPECT_EQ(labels.dataset, "shapes");
  EXPECT_EQ(back.pair_ids, ds.pair_ids);
  EXPECT_EQ(encode_emb1(back.right), encode_emb1(ds.right));
}

TEST(Manifest, MismatchedPairCount) {
  const auto dir = scratch("manifest_bad");
  save_emb1(EmbeddingMatrix::Ones(3, 2), dir / "l.emb");
  save_emb1(EmbeddingMatrix::Ones(2, 2), dir / "r.emb");
  std::ofstream(dir / "m.json") << R"({"left":"l.emb","right":"r.emb","pair_ids":["a","b","c"]})";
  EXPECT_EQ(code_of([&] { load_dataset(dir / "m.json"); }), Errc::dimension_mismatch);
}
