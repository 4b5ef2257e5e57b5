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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pst2/autodiff.h"
#include "pst2/nn.h"

namespace pst2 {

/// One point cloud: coordinates [n, 3], per-point features [n, f] (f may be
/// zero) and optional integer labels.
struct PointCloudFrame {
  Tensor coords;
  Tensor feats;
  std::optional<std::vector<std::int32_t>> labels;

  std::size_t size() const { return coords.defined() ? coords.dim(0) : 0; }
  std::size_t feat_width() const { return feats.defined() && feats.rank() == 2 ? feats.dim(1) : 0; }
  /// Throws ContractError/DimensionError on a malformed frame.
  void validate(std::size_t num_classes) const;
};

struct PointCloudSequence {
  std::vector<PointCloudFrame> frames;
  std::size_t num_classes = 0;

  std::size_t length() const { return frames.size(); }
  std::size_t feat_width() const { return frames.empty() ? 0 : frames.front().feat_width(); }
  void validate() const;
};

struct SeedSet {
  std::vector<std::int64_t> indices;
  Tensor coords;  // [m, 3]

  std::size_t size() const { return indices.size(); }
};

/// Per-seed neighbor lists, row-major [m, k]. Short lists are padded by
/// repeating their first entry.
struct NeighborhoodGrouping {
  SeedSet seeds;
  std::vector<std::int64_t> neighbor_idx;
  double radius = 0;
  std::size_t k = 0;

  std::size_t num_seeds() const { return seeds.size(); }
  std::span<const std::int64_t> neighbors(std::size_t seed) const {
    return std::span<const std::int64_t>(neighbor_idx).subspan(seed * k, k);
  }
};

/// Per-seed features of one frame at one encoder level.
struct FeatureMap {
  Tensor seed_coords;  // [m, 3]
  Var feats;           // [m, d]
  int frame_index = 0;
};

using Point3 = std::array<double, 3>;

std::vector<Point3> to_points(const Tensor& coords);
Tensor from_points(std::span<const Point3> points, DType dtype);

/// Greedy farthest point sampling under squared Euclidean distance. Seeds
/// start at `start`; ties go to the lowest index.
SeedSet fps(const Tensor& coords, std::size_t m, std::size_t start = 0);

/// Subset of `seeds` taking the listed positions, in order.
SeedSet subset(const SeedSet& seeds, std::span<const std::int64_t> positions);

/// Up to `k` points of `coords` within `radius` of every seed, in ascending
/// index order. A seed with no point in range falls back to the nearest
/// point.
NeighborhoodGrouping ball_query(const SeedSet& seeds, const Tensor& coords, double radius,
                                std::size_t k);

/// Gathers neighbor features, appends (neighbor - seed) coordinates, applies
/// the shared MLP and max-pools over neighbors. `feats` may be an invalid
/// Var when the input carries no features. Returns [m, mlp.out_dim()].
Var set_abstraction(Tape& tape, const Var& feats, const Tensor& coords,
                    const NeighborhoodGrouping& grouping, Mlp& mlp);

FeatureMap set_abstraction(Tape& tape, const PointCloudFrame& frame,
                           const NeighborhoodGrouping& grouping, Mlp& mlp, int frame_index = 0);
FeatureMap set_abstraction(Tape& tape, const FeatureMap& input,
                           const NeighborhoodGrouping& grouping, Mlp& mlp);

/// Inverse-distance weights over the p nearest sources of every target.
struct InterpolationWeights {
  std::vector<std::int64_t> idx;  // [q, p]
  std::vector<double> weights;    // [q, p], rows sum to 1
  std::size_t p = 0;
};

inline constexpr double kInterpolationEps = 1e-8;

InterpolationWeights idw_weights(const Tensor& targets, const Tensor& sources, std::size_t p = 3,
                                 double eps = kInterpolationEps);

/// Feature-propagation interpolation of `sources` onto `targets`: [q, d].
Var interpolate_features(const Tensor& targets, const FeatureMap& sources, std::size_t p = 3);

}  // namespace pst2
