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

#include "simadapt/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "simadapt/error.hpp"
#include "simadapt/random.hpp"

namespace simadapt {

namespace fs = std::filesystem;

void check_embedding(const EmbeddingMatrix& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(Errc::invalid_argument, std::string(what) + ": empty matrix");
  }
  if (!m.allFinite()) {
    throw Error(Errc::non_finite, std::string(what) + ": non-finite entry");
  }
}

// ---------------------------------------------------------------------------

FeatureMap make_feature_map(Index height, Index width, Index channels,
                            const std::vector<double>& channel_major) {
  if (height < 1 || width < 1 || channels < 1) {
    throw Error(Errc::invalid_argument, "feature map dimensions must be >= 1");
  }
  const Index positions = height * width;
  if (static_cast<Index>(channel_major.size()) != positions * channels) {
    throw Error(Errc::dimension_mismatch, "feature map data length does not match dimensions");
  }
  FeatureMap map{height, width, Matrix(positions, channels)};
  for (Index c = 0; c < channels; ++c) {
    for (Index p = 0; p < positions; ++p) {
      map.values(p, c) = channel_major[static_cast<std::size_t>(c * positions + p)];
    }
  }
  return map;
}

std::vector<Vector> pool_spatial(const FeatureMapStack& maps) {
  if (maps.layers.empty()) throw Error(Errc::invalid_argument, "no layers");
  std::vector<Vector> pooled;
  pooled.reserve(maps.layers.size());
  for (const auto& layer : maps.layers) {
    if (layer.height < 1 || layer.width < 1 || layer.channels() < 1 ||
        layer.values.rows() != layer.height * layer.width) {
      throw Error(Errc::invalid_argument, "malformed feature map");
    }
    if (!layer.values.allFinite()) throw Error(Errc::non_finite, "feature map has non-finite entries");
    pooled.emplace_back(layer.values.colwise().mean().transpose());
  }
  return pooled;
}

Vector l2_normalize(const Vector& v) {
  if (!v.allFinite()) throw Error(Errc::non_finite, "cannot normalize a non-finite vector");
  const double norm = v.norm();
  if (!(norm > 0.0)) throw Error(Errc::invalid_argument, "zero-norm vector");
  return v / norm;
}

Vector concat_layers(const std::vector<Vector>& vectors) {
  if (vectors.empty()) throw Error(Errc::invalid_argument, "no layers to concatenate");
  Index total = 0;
  for (const auto& v : vectors) total += v.size();
  Vector out(total);
  Index offset = 0;
  for (const auto& v : vectors) {
    out.segment(offset, v.size()) = v;
    offset += v.size();
  }
  return out;
}

Vector describe(const FeatureMapStack& maps, bool renormalize) {
  auto pooled = pool_spatial(maps);
  for (auto& v : pooled) v = l2_normalize(v);
  Vector out = concat_layers(pooled);
  return renormalize ? l2_normalize(out) : out;
}

// ---------------------------------------------------------------------------

void check_dataset(const PairedDataset& ds) {
  check_embedding(ds.left, "left embeddings");
  check_embedding(ds.right, "right embeddings");
  if (ds.left.rows() != ds.right.rows() || ds.left.cols() != ds.right.cols()) {
    throw Error(Errc::dimension_mismatch, "left and right embeddings differ in shape");
  }
  if (static_cast<Index>(ds.pair_ids.size()) != ds.left.rows()) {
    throw Error(Errc::dimension_mismatch, "pair_ids length does not match row count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ds.pair_ids) {
    if (!seen.insert(id).second) throw Error(Errc::invalid_argument, "duplicate pair id: " + id);
  }
}

std::vector<std::string> sequential_pair_ids(Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  char buf[32];
  for (Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "pair_%06lld", static_cast<long long>(i));
    ids.emplace_back(buf);
  }
  return ids;
}

PairedDataset subset(const PairedDataset& ds, const IndexList& rows) {
  PairedDataset out;
  out.left.resize(static_cast<Index>(rows.size()), ds.left.cols());
  out.right.resize(static_cast<Index>(rows.size()), ds.right.cols());
  out.pair_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    out.left.row(static_cast<Index>(i)) = ds.left.row(r);
    out.right.row(static_cast<Index>(i)) = ds.right.row(r);
    if (!ds.pair_ids.empty()) out.pair_ids.push_back(ds.pair_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

SplitIndices split_pairs(Index n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<Index>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw Error(Errc::invalid_argument, "split leaves the train or test side empty");
  }

  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(i + 1)]);
  }

  SplitIndices split;
  split.seed = seed;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.test.assign(perm.begin() + n_train, perm.end());
  return split;
}

SplitIndices split_pairs(const PairedDataset& ds, double train_fraction, std::uint64_t seed) {
  return split_pairs(ds.size(), train_fraction, seed);
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_emb1(const EmbeddingMatrix& m) {
  check_embedding(m);
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (static_cast<std::uint64_t>(m.rows()) > kMax || static_cast<std::uint64_t>(m.cols()) > kMax) {
    throw Error(Errc::dimension_overflow, "matrix too large for EMB1 header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEmb1HeaderSize + 4 * static_cast<std::size_t>(m.size()));
  out.insert(out.end(), {'E', 'M', 'B', '1'});
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, 0);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const auto f = static_cast<float>(m(i, j));
      if (!std::isfinite(f)) throw Error(Errc::non_finite, "value overflows float32");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

EmbeddingMatrix decode_emb1(const std::vector<std::uint8_t>& bytes, const Emb1ReadOptions& opts) {
  if (bytes.size() < kEmb1HeaderSize) throw Error(Errc::truncated, "EMB1: file shorter than header");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "EMB1")) throw Error(Errc::bad_magic, "EMB1: bad magic");
  const std::uint64_t rows = get_u32(bytes.data() + 4);
  const std::uint64_t cols = get_u32(bytes.data() + 8);
  if (get_u32(bytes.data() + 12) != 0) throw Error(Errc::bad_header, "EMB1: reserved field is not zero");
  if (rows == 0 || cols == 0) throw Error(Errc::bad_header, "EMB1: zero dimension");
  if (rows * cols > opts.max_elements) {
    throw Error(Errc::dimension_overflow, "EMB1: declared size exceeds element limit");
  }
  const std::uint64_t payload = rows * cols * 4;
  if (bytes.size() - kEmb1HeaderSize < payload) throw Error(Errc::truncated, "EMB1: truncated payload");
  if (bytes.size() - kEmb1HeaderSize > payload) throw Error(Errc::bad_header, "EMB1: trailing bytes after payload");

  EmbeddingMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const std::uint8_t* p = bytes.data() + kEmb1HeaderSize;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j, p += 4) {
      const float f = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(f)) throw Error(Errc::non_finite, "EMB1: non-finite entry");
      m(i, j) = f;
    }
  }
  return m;
}

void save_emb1(const EmbeddingMatrix& m, const fs::path& path) {
  const auto bytes = encode_emb1(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

EmbeddingMatrix load_emb1(const fs::path& path, const Emb1ReadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_emb1(bytes, opts);
}

// ---------------------------------------------------------------------------

fs::path save_dataset(const PairedDataset& ds, const fs::path& dir, const DatasetLabels& labels) {
  check_dataset(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create directory: " + dir.string());
  save_emb1(ds.left, dir / "left.emb");
  save_emb1(ds.right, dir / "right.emb");

  nlohmann::ordered_json manifest;
  manifest["left"] = "left.emb";
  manifest["right"] = "right.emb";
  manifest["pair_ids"] = ds.pair_ids;
  manifest["model"] = labels.model;
  manifest["dataset"] = labels.dataset;
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for write: " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

PairedDataset load_dataset(const fs::path& manifest_path, DatasetLabels* labels) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(Errc::not_found, "dataset manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, "malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  for (const char* key : {"left", "right", "pair_ids"}) {
    if (!manifest.contains(key)) {
      throw Error(Errc::bad_header, std::string("manifest missing key '") + key + "'");
    }
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  PairedDataset ds;
  ds.left = load_emb1(resolve(manifest["left"].get<std::string>()));
  ds.right = load_emb1(resolve(manifest["right"].get<std::string>()));
  ds.pair_ids = manifest["pair_ids"].get<std::vector<std::string>>();
  check_dataset(ds);
  if (labels) {
    labels->model = manifest.value("model", labels->model);
    labels->dataset = manifest.value("dataset", labels->dataset);
  }
  return ds;
}

}  // namespace simadapt
