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
#include <string>

#include "simadapt/embedding_store.hpp"
#include "simadapt/types.hpp"

namespace simadapt {

/// Paired data with a planted visual subspace shared by both sides of a pair
/// and a semantic subspace carrying independent distractors per side:
///
///   left_i  = M_L z_i + rho N u_i^L + noise
///   right_i = M_R z_i + rho N u_i^R + noise
///
/// then every row is L2-normalized. Latents are Gaussian scaled to unit
/// expected norm, so rho^2 is the semantic-to-visual energy ratio.
struct SynthConfig {
  Index n_pairs = 2000;
  Index visual_dim = 16;
  Index semantic_dim = 64;
  Index ambient_dim = 256;
  double semantic_strength = 4.0;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
  /// Give the right side its own visual basis M_R (orthogonal to M_L).
  bool distinct_visual_mixing = false;

  void validate() const;
};

/// Named presets: "default" and "tiny".
SynthConfig synth_preset(const std::string& name);

/// Mixing bases, each with orthonormal columns, mutually orthogonal.
struct SynthBasis {
  Matrix visual_left;   // D x v
  Matrix visual_right;  // D x v
  Matrix semantic;      // D x s
};

SynthBasis make_basis(const SynthConfig& cfg);

PairedDataset generate(const SynthConfig& cfg);

}  // namespace simadapt
