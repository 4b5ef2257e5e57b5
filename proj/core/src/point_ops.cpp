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

#include "pst2/point_ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pst2/errors.h"

namespace pst2 {
namespace {

double dist2(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

void check_coords(const Tensor& coords, const char* where) {
  if (!coords.defined() || coords.rank() != 2 || coords.dim(1) != 3) {
    throw DimensionError(std::string(where) + ": coords must be [n, 3]");
  }
}

}  // namespace

void PointCloudFrame::validate(std::size_t num_classes) const {
  check_coords(coords, "PointCloudFrame");
  const std::size_t n = size();
  if (n == 0) throw ContractError("PointCloudFrame: frame has no points");
  if (!coords.all_finite()) throw NumericError("PointCloudFrame: non-finite coordinates");
  if (feats.defined() && (feats.rank() != 2 || feats.dim(0) != n)) {
    throw DimensionError("PointCloudFrame: feats must be [n, f]");
  }
  if (labels) {
    if (labels->size() != n) throw DimensionError("PointCloudFrame: one label per point required");
    for (std::int32_t l : *labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
        throw ContractError("PointCloudFrame: label " + std::to_string(l) + " outside [0, " +
                            std::to_string(num_classes) + ")");
      }
    }
  }
}

void PointCloudSequence::validate() const {
  if (frames.empty()) throw ContractError("PointCloudSequence: no frames");
  for (const auto& f : frames) {
    f.validate(num_classes);
    if (f.feat_width() != feat_width()) {
      throw DimensionError("PointCloudSequence: frames disagree on feature width");
    }
  }
}

std::vector<Point3> to_points(const Tensor& coords) {
  check_coords(coords, "to_points");
  const auto v = coords.to_vector();
  std::vector<Point3> pts(coords.dim(0));
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return pts;
}

Tensor from_points(std::span<const Point3> points, DType dtype) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
  return Tensor::from_values({points.size(), 3}, flat, dtype);
}

SeedSet fps(const Tensor& coords, std::size_t m, std::size_t start) {
  check_coords(coords, "fps");
  const auto pts = to_points(coords);
  const std::size_t n = pts.size();
  if (m < 1 || m > n) {
    throw ContractError("fps: need 1 <= m <= n, got m=" + std::to_string(m) +
                        " n=" + std::to_string(n));
  }
  if (start >= n) throw ContractError("fps: start index out of range");
  SeedSet s;
  s.indices.reserve(m);
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::size_t cur = start;
  for (std::size_t it = 0; it < m; ++it) {
    s.indices.push_back(static_cast<std::int64_t>(cur));
    mind[cur] = -1.0;  // chosen
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mind[i] < 0) continue;
      mind[i] = std::min(mind[i], dist2(pts[i], pts[cur]));
      if (mind[i] > best_d) {
        best_d = mind[i];
        best = i;
      }
    }
    cur = best;
  }
  std::vector<Point3> chosen;
  for (auto i : s.indices) chosen.push_back(pts[static_cast<std::size_t>(i)]);
  s.coords = from_points(chosen, coords.dtype());
  return s;
}

SeedSet subset(const SeedSet& seeds, std::span<const std::int64_t> positions) {
  const auto pts = to_points(seeds.coords);
  SeedSet out;
  std::vector<Point3> chosen;
  for (std::int64_t p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= seeds.size()) {
      throw ContractError("subset: position out of range");
    }
    out.indices.push_back(seeds.indices[static_cast<std::size_t>(p)]);
    chosen.push_back(pts[static_cast<std::size_t>(p)]);
  }
  out.coords = from_points(chosen, seeds.coords.dtype());
  return out;
}

NeighborhoodGrouping ball_query(const SeedSet& seeds, const Tensor& coords, double radius,
                                std::size_t k) {
  check_coords(coords, "ball_query");
  if (!(radius > 0)) throw ContractError("ball_query: radius must be positive");
  if (k < 1) throw ContractError("ball_query: k must be >= 1");
  const auto pts = to_points(coords);
  const auto centers = to_points(seeds.coords);
  if (pts.empty()) throw ContractError("ball_query: empty point set");
  const double r2 = radius * radius;
  NeighborhoodGrouping g;
  g.seeds = seeds;
  g.radius = radius;
  g.k = k;
  g.neighbor_idx.reserve(centers.size() * k);
  for (const auto& c : centers) {
    std::size_t found = 0;
    const std::size_t row = g.neighbor_idx.size();
    for (std::size_t i = 0; i < pts.size() && found < k; ++i) {
      if (dist2(pts[i], c) <= r2) {
        g.neighbor_idx.push_back(static_cast<std::int64_t>(i));
        ++found;
      }
    }
    if (found == 0) {
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = dist2(pts[i], c);
        if (d < best) {
          best = d;
          nearest = i;
        }
      }
      g.neighbor_idx.push_back(static_cast<std::int64_t>(nearest));
      found = 1;
    }
    const std::int64_t first = g.neighbor_idx[row];
    for (; found < k; ++found) g.neighbor_idx.push_back(first);
  }
  return g;
}

Var set_abstraction(Tape& tape, const Var& feats, const Tensor& coords,
                    const NeighborhoodGrouping& grouping, Mlp& mlp) {
  check_coords(coords, "set_abstraction");
  const std::size_t m = grouping.num_seeds();
  const std::size_t k = grouping.k;
  const std::size_t n = coords.dim(0);
  if (grouping.neighbor_idx.size() != m * k) {
    throw DimensionError("set_abstraction: malformed grouping");
  }
  for (std::int64_t i : grouping.neighbor_idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) {
      throw ContractError("set_abstraction: neighbor index out of range");
    }
  }
  const DType dtype = feats.valid() ? feats.dtype() : mlp.layers().front().weight.value.dtype();
  const auto pts = to_points(coords);
  const auto centers = to_points(grouping.seeds.coords);
  std::vector<double> rel(m * k * 3);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& p = pts[static_cast<std::size_t>(grouping.neighbor_idx[s * k + j])];
      for (int c = 0; c < 3; ++c) rel[(s * k + j) * 3 + c] = p[c] - centers[s][c];
    }
  }
  Var rel_v = tape.constant(Tensor::from_values({m * k, 3}, rel, dtype));
  Var x = rel_v;
  if (feats.valid() && feats.dim(-1) > 0) {
    if (feats.shape().size() != 2 || feats.dim(0) != n) {
      throw DimensionError("set_abstraction: feats must be [n, f] matching coords");
    }
    const Var parts[] = {gather_rows(feats, grouping.neighbor_idx), rel_v};
    x = concat(parts, 1);
  }
  if (mlp.in_dim() != x.dim(1)) {
    throw DimensionError("set_abstraction: MLP expects width " + std::to_string(mlp.in_dim()) +
                         ", grouped input has " + std::to_string(x.dim(1)));
  }
  Var y = mlp.forward(tape, x);
  return max_over_axis(reshape(y, {m, k, y.dim(1)}), 1);
}

FeatureMap set_abstraction(Tape& tape, const PointCloudFrame& frame,
                           const NeighborhoodGrouping& grouping, Mlp& mlp, int frame_index) {
  Var feats;
  if (frame.feat_width() > 0) {
    const DType dtype = mlp.layers().front().weight.value.dtype();
    feats = tape.constant(frame.feats.astype(dtype));
  }
  FeatureMap out;
  out.seed_coords = grouping.seeds.coords;
  out.feats = set_abstraction(tape, feats, frame.coords, grouping, mlp);
  out.frame_index = frame_index;
  return out;
}

FeatureMap set_abstraction(Tape& tape, const FeatureMap& input,
                           const NeighborhoodGrouping& grouping, Mlp& mlp) {
  FeatureMap out;
  out.seed_coords = grouping.seeds.coords;
  out.feats = set_abstraction(tape, input.feats, input.seed_coords, grouping, mlp);
  out.frame_index = input.frame_index;
  return out;
}

InterpolationWeights idw_weights(const Tensor& targets, const Tensor& sources, std::size_t p,
                                 double eps) {
  const auto tq = to_points(targets);
  const auto src = to_points(sources);
  if (src.empty()) throw ContractError("interpolate: no source points");
  if (p == 0) throw ContractError("interpolate: p must be >= 1");
  InterpolationWeights w;
  w.p = std::min(p, src.size());
  w.idx.reserve(tq.size() * w.p);
  w.weights.reserve(tq.size() * w.p);
  std::vector<std::size_t> order(src.size());
  std::vector<double> d(src.size());
  for (const auto& t : tq) {
    for (std::size_t i = 0; i < src.size(); ++i) d[i] = dist2(t, src[i]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(w.p), order.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
    double total = 0;
    std::vector<double> invs(w.p);
    for (std::size_t j = 0; j < w.p; ++j) {
      invs[j] = 1.0 / (std::sqrt(d[order[j]]) + eps);
      total += invs[j];
    }
    for (std::size_t j = 0; j < w.p; ++j) {
      w.idx.push_back(static_cast<std::int64_t>(order[j]));
      w.weights.push_back(invs[j] / total);
    }
  }
  return w;
}

Var interpolate_features(const Tensor& targets, const FeatureMap& sources, std::size_t p) {
  if (!sources.feats.valid()) throw ContractError("interpolate: sources carry no features");
  if (sources.feats.dim(0) != sources.seed_coords.dim(0)) {
    throw DimensionError("interpolate: source features and coordinates disagree");
  }
  const InterpolationWeights w = idw_weights(targets, sources.seed_coords, p);
  return weighted_gather(sources.feats, w.idx, w.weights, w.p);
}

}  // namespace pst2
