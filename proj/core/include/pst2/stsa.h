// Copyright 2026 The PST2 Authors.
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

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pst2/nn.h"

namespace pst2 {

struct STSAConfig {
  std::size_t in_dim = 128;  // per-frame feature width
  std::size_t dim = 128;     // token width d
  std::size_t window = 3;    // frames per patch
  std::size_t stride = 1;

  void validate() const;
  /// Window positions for T frames: (T - window) / stride + 1.
  std::size_t num_windows(std::size_t frames) const;
};

/// Where a token came from: seed j over the frames [first_frame,
/// first_frame + window).
struct TokenSource {
  std::size_t seed = 0;
  std::size_t window = 0;
  std::size_t first_frame = 0;
};

/// Aligned spatio-temporal tokens, window-major then seed-minor.
struct PatchSet {
  Var tokens;  // [N, d]
  std::vector<TokenSource> index_map;
  std::size_t frames = 0;
  std::size_t seeds = 0;
  std::size_t window = 1;
  std::size_t stride = 1;
  std::size_t num_windows = 0;

  std::size_t size() const { return index_map.size(); }
};

struct AttentionTrace {
  Tensor scores;      // Q K^T
  Tensor scaled;      // scores / sqrt(d)
  Tensor attention;   // row softmax of scaled
};

/// Learnable state of one self-attention block.
struct STSAParams {
  STSAParams() = default;
  STSAParams(const std::string& name, STSAConfig cfg, DType dtype, std::mt19937_64& rng);

  void collect_params(std::vector<Param*>& out);

  STSAConfig cfg;
  Param temporal_conv;  // [window * in_dim, d]
  Param wq;             // [d, d]
  Param wk;
  Param wv;
  Mlp ffn;  // d -> 2d (ReLU) -> d
  Param ln_gain;
  Param ln_bias;
};

/// Builds one token per (window, seed) by concatenating the seed's features
/// over the window's frames and applying the temporal linear map. Throws
/// AlignmentError when frames disagree on seed count.
PatchSet patch_division(Tape& tape, std::span<const Var> frame_feats, STSAParams& params);

/// Single-head scaled dot-product attention over every token.
std::pair<Var, AttentionTrace> self_attention(Tape& tape, const PatchSet& patches,
                                              STSAParams& params);

/// LayerNorm(FeedForward(attention(F) + F)).
Var stsa_forward(Tape& tape, const PatchSet& patches, STSAParams& params,
                 AttentionTrace* trace = nullptr);

/// Per-frame [m, d] features from token outputs: frame t, seed j receives the
/// mean of the outputs of every window covering t.
std::vector<Var> scatter_tokens(const Var& outputs, const PatchSet& patches);

}  // namespace pst2
