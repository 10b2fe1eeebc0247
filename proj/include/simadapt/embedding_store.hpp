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
#include <filesystem>
#include <string>
#include <vector>

#include "simadapt/types.hpp"

namespace simadapt {

/// Throws Errc::invalid_argument unless m is non-empty with all entries finite.
void check_embedding(const EmbeddingMatrix& m, const char* what = "embedding matrix");

// ---------------------------------------------------------------------------
// Raw feature preprocessing

/// One layer's activations. `values` holds height*width rows (spatial
/// positions, row-major over height then width) and one column per channel.
struct FeatureMap {
  Index height = 0;
  Index width = 0;
  Matrix values;

  Index channels() const { return values.cols(); }
};

/// Per-layer activations of one image, in tap order (shallow to deep).
struct FeatureMapStack {
  std::vector<FeatureMap> layers;
};

/// Builds a map from channel-major data: data[c * height * width + p].
FeatureMap make_feature_map(Index height, Index width, Index channels,
                            const std::vector<double>& channel_major);

/// Spatial mean of every channel, one vector per layer.
std::vector<Vector> pool_spatial(const FeatureMapStack& maps);

/// Returns v / ||v||. Zero vectors are rejected rather than mapped to zero.
Vector l2_normalize(const Vector& v);

Vector concat_layers(const std::vector<Vector>& vectors);

/// pool -> normalize per layer -> concat. With `renormalize`, the
/// concatenated descriptor is normalized once more.
Vector describe(const FeatureMapStack& maps, bool renormalize = false);

// ---------------------------------------------------------------------------
// Paired data

struct PairedDataset {
  EmbeddingMatrix left;
  EmbeddingMatrix right;
  std::vector<std::string> pair_ids;

  Index size() const { return left.rows(); }
  Index dim() const { return left.cols(); }
};

/// Validates the pairing invariants (equal shapes, unique ids, finite data).
void check_dataset(const PairedDataset& ds);

/// Ids "pair_000000", "pair_000001", ...
std::vector<std::string> sequential_pair_ids(Index n);

/// Rows of `ds` at `rows`, in that order.
PairedDataset subset(const PairedDataset& ds, const IndexList& rows);

struct SplitIndices {
  IndexList train;
  IndexList test;
  std::uint64_t seed = 0;
};

/// Pair-preserving shuffle split; |train| = floor(train_fraction * n).
SplitIndices split_pairs(const PairedDataset& ds, double train_fraction, std::uint64_t seed);

/// Same as above when only the pair count matters.
SplitIndices split_pairs(Index n, double train_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// EMB1 binary container
//
//   bytes 0-3    "EMB1"
//   bytes 4-7    n_rows, uint32 little-endian
//   bytes 8-11   n_cols, uint32 little-endian
//   bytes 12-15  reserved, zero
//   payload      n_rows * n_cols float32 little-endian, row-major

inline constexpr std::size_t kEmb1HeaderSize = 16;

struct Emb1ReadOptions {
  /// Upper bound on n_rows * n_cols accepted from a header.
  std::uint64_t max_elements = std::uint64_t{1} << 32;
};

std::vector<std::uint8_t> encode_emb1(const EmbeddingMatrix& m);
EmbeddingMatrix decode_emb1(const std::vector<std::uint8_t>& bytes, const Emb1ReadOptions& opts = {});

void save_emb1(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix load_emb1(const std::filesystem::path& path, const Emb1ReadOptions& opts = {});

// ---------------------------------------------------------------------------
// Dataset manifest: {"left": <path>, "right": <path>, "pair_ids": [...]}
// Relative paths resolve against the manifest's directory. Optional "model"
// and "dataset" strings label reports.

struct DatasetLabels {
  std::string model = "synthetic";
  std::string dataset = "synth";
};

/// Writes left.emb, right.emb and manifest.json into `dir`; returns the manifest path.
std::filesystem::path save_dataset(const PairedDataset& ds, const std::filesystem::path& dir,
                                   const DatasetLabels& labels = {});

PairedDataset load_dataset(const std::filesystem::path& manifest, DatasetLabels* labels = nullptr);

}  // namespace simadapt
