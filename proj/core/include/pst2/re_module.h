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
#include <string>
#include <vector>

#include "pst2/nn.h"
#include "pst2/point_ops.h"

namespace pst2 {

/// Widths of the three learnable pieces of a resolution embedding. The last
/// width of both branches must equal `output_dim`.
struct REConfig {
  std::vector<std::size_t> feature_mlp{128};
  std::vector<std::size_t> resolution_mlp{128};
  std::size_t output_dim = 128;
  double radius = 1.5;
  std::size_t k = 16;

  void validate() const;
};

/// Intermediate results of one resolution-embedding pass.
struct REState {
  Var n_feat;          // feature-block output [m', d']
  Var k_feat;          // resolution-block output [m', d']
  Var fusion_weights;  // [m', 2], rows are softmax([a1, a2])
  Var fused;           // a1 * k + a2 * n
  Tensor seed_coords;  // [m', 3]
};

/// Two-branch block: a set-abstraction "feature" branch and a split/concat
/// "resolution" branch, fused by a two-way softmax gate computed from both.
class ResolutionEmbedding {
 public:
  ResolutionEmbedding() = default;
  ResolutionEmbedding(const std::string& name, std::size_t in_dim, REConfig cfg, DType dtype,
                      std::mt19937_64& rng);

  const REConfig& config() const { return cfg_; }
  std::size_t in_dim() const { return in_dim_; }

  /// Output seed count for an input with m seeds: ceil(m / 2).
  static std::size_t output_seeds(std::size_t m) { return (m + 1) / 2; }

  /// Neighborhoods for the feature block: the first ceil(m/2) input seeds
  /// (an FPS prefix) grouped against all m input seeds.
  NeighborhoodGrouping grouping_for(const Tensor& seed_coords) const;

  Var feature_block(Tape& tape, const FeatureMap& h, const NeighborhoodGrouping& grouping);
  /// g = [h[0:m/2] | h[m/2:m]] along channels, then k = f(g). Odd m is
  /// padded first with pad_rows_to_even.
  Var resolution_block(Tape& tape, const Var& h);
  /// Returns (I, [a1, a2]) with [a1, a2] = softmax(gamma(k | n)).
  std::pair<Var, Var> fuse(Tape& tape, const Var& k_feat, const Var& n_feat);

  REState forward(Tape& tape, const FeatureMap& h, const NeighborhoodGrouping& grouping);
  REState forward(Tape& tape, const FeatureMap& h);

  Mlp& feature_mlp() { return feature_mlp_; }
  Mlp& resolution_mlp() { return resolution_mlp_; }
  Mlp& gamma() { return gamma_; }
  void collect_params(std::vector<Param*>& out);

 private:
  REConfig cfg_;
  std::size_t in_dim_ = 0;
  Mlp feature_mlp_;
  Mlp resolution_mlp_;
  Mlp gamma_;
};

/// Free-function forms over explicit MLPs. resolution_block needs an even
/// row count and throws ContractError otherwise.
Var resolution_block(Tape& tape, const Var& h, Mlp& f);
/// Repeats the last row when the row count is odd.
Var pad_rows_to_even(const Var& h);
std::pair<Var, Var> re_fuse(Tape& tape, const Var& k_feat, const Var& n_feat, Mlp& gamma);

}  // namespace pst2
