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

#include "pst2/re_module.h"

#include <numeric>

#include "pst2/errors.h"

namespace pst2 {

void REConfig::validate() const {
  if (feature_mlp.empty() || resolution_mlp.empty()) {
    throw ContractError("REConfig: both branches need at least one layer");
  }
  if (feature_mlp.back() != output_dim || resolution_mlp.back() != output_dim) {
    throw ContractError("REConfig: branch output widths must both equal output_dim");
  }
  if (!(radius > 0) || k == 0) throw ContractError("REConfig: radius and k must be positive");
}

ResolutionEmbedding::ResolutionEmbedding(const std::string& name, std::size_t in_dim,
                                         REConfig cfg, DType dtype, std::mt19937_64& rng)
    : cfg_(std::move(cfg)), in_dim_(in_dim) {
  cfg_.validate();
  feature_mlp_ = Mlp(name + ".feature", in_dim + 3, cfg_.feature_mlp, Activation::kRelu, dtype, rng);
  resolution_mlp_ =
      Mlp(name + ".resolution", 2 * in_dim, cfg_.resolution_mlp, Activation::kRelu, dtype, rng);
  const std::size_t gamma_widths[] = {cfg_.output_dim, 2};
  gamma_ = Mlp(name + ".gamma", 2 * cfg_.output_dim, gamma_widths, Activation::kNone, dtype, rng);
}

NeighborhoodGrouping ResolutionEmbedding::grouping_for(const Tensor& seed_coords) const {
  const std::size_t m = seed_coords.dim(0);
  SeedSet all;
  all.indices.resize(m);
  std::iota(all.indices.begin(), all.indices.end(), std::int64_t{0});
  all.coords = seed_coords;
  std::vector<std::int64_t> prefix(output_seeds(m));
  std::iota(prefix.begin(), prefix.end(), std::int64_t{0});
  return ball_query(subset(all, prefix), seed_coords, cfg_.radius, cfg_.k);
}

Var ResolutionEmbedding::feature_block(Tape& tape, const FeatureMap& h,
                                       const NeighborhoodGrouping& grouping) {
  return set_abstraction(tape, h.feats, h.seed_coords, grouping, feature_mlp_);
}

Var resolution_block(Tape& tape, const Var& h, Mlp& f) {
  if (h.shape().size() != 2) throw DimensionError("resolution_block: h must be [m, d]");
  const std::size_t m = h.dim(0);
  if (m == 0 || m % 2 == 1) {
    throw ContractError("resolution_block: row count must be even and positive, got " + std::to_string(m));
  }
  const Var halves[] = {slice(h, 0, 0, m / 2), slice(h, 0, m / 2, m)};
  Var g = concat(halves, 1);
  return f.forward(tape, g);
}

std::pair<Var, Var> re_fuse(Tape& tape, const Var& k_feat, const Var& n_feat, Mlp& gamma) {
  if (k_feat.shape() != n_feat.shape()) {
    throw DimensionError("re_fuse: branch shapes " + shape_to_string(k_feat.shape()) + " and " +
                         shape_to_string(n_feat.shape()) + " differ");
  }
  const Var both[] = {k_feat, n_feat};
  Var weights = softmax_rows(gamma.forward(tape, concat(both, 1)));
  const std::size_t cols[] = {1, 1};
  auto a = split(weights, 1, cols);
  Var fused = add(mul(a[0], k_feat), mul(a[1], n_feat));
  return {fused, weights};
}

Var pad_rows_to_even(const Var& h) {
  if (h.shape().size() != 2) throw DimensionError("pad_rows_to_even: h must be [m, d]");
  const std::size_t m = h.dim(0);
  if (m % 2 == 0) return h;
  const Var parts[] = {h, slice(h, 0, m - 1, m)};
  return concat(parts, 0);
}

Var ResolutionEmbedding::resolution_block(Tape& tape, const Var& h) {
  return pst2::resolution_block(tape, pad_rows_to_even(h), resolution_mlp_);
}

std::pair<Var, Var> ResolutionEmbedding::fuse(Tape& tape, const Var& k_feat, const Var& n_feat) {
  return re_fuse(tape, k_feat, n_feat, gamma_);
}

REState ResolutionEmbedding::forward(Tape& tape, const FeatureMap& h,
                                     const NeighborhoodGrouping& grouping) {
  REState s;
  s.n_feat = feature_block(tape, h, grouping);
  s.k_feat = resolution_block(tape, h.feats);
  auto [fused, weights] = fuse(tape, s.k_feat, s.n_feat);
  s.fused = fused;
  s.fusion_weights = weights;
  s.seed_coords = grouping.seeds.coords;
  return s;
}

REState ResolutionEmbedding::forward(Tape& tape, const FeatureMap& h) {
  return forward(tape, h, grouping_for(h.seed_coords));
}

void ResolutionEmbedding::collect_params(std::vector<Param*>& out) {
  feature_mlp_.collect_params(out);
  resolution_mlp_.collect_params(out);
  gamma_.collect_params(out);
}

}  // namespace pst2
