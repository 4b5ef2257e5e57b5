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

#include "pst2/data.h"

#include <cmath>
#include <numbers>
#include <random>

#include "pst2/errors.h"

namespace pst2 {
namespace {

constexpr double kObjectLift = 0.1;

struct BoxShape {
  double sx, sy, sz;
};

BoxShape class_shape(std::size_t cls) {
  static constexpr BoxShape kShapes[] = {
      {0.9, 0.5, 0.4},    // low and wide
      {0.25, 0.25, 1.2},  // pole
      {0.5, 0.5, 0.8},
      {1.2, 0.3, 0.3},
  };
  const BoxShape b = kShapes[(cls - 1) % 4];
  const double grow = 1.0 + 0.25 * static_cast<double>((cls - 1) / 4);
  return {b.sx * grow, b.sy * grow, b.sz * grow};
}

// Uniform samples on the five visible faces of an axis-aligned box whose base
// center sits at the origin.
std::vector<Point3> sample_box_surface(const BoxShape& b, std::size_t count, std::mt19937_64& rng) {
  const double areas[] = {b.sx * b.sy, b.sx * b.sz, b.sx * b.sz, b.sy * b.sz, b.sy * b.sz};
  std::discrete_distribution<int> face(std::begin(areas), std::end(areas));
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> h(0.0, 1.0);
  std::vector<Point3> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    switch (face(rng)) {
      case 0: pts.push_back({u(rng) * b.sx, u(rng) * b.sy, b.sz}); break;
      case 1: pts.push_back({u(rng) * b.sx, -0.5 * b.sy, h(rng) * b.sz}); break;
      case 2: pts.push_back({u(rng) * b.sx, 0.5 * b.sy, h(rng) * b.sz}); break;
      case 3: pts.push_back({-0.5 * b.sx, u(rng) * b.sy, h(rng) * b.sz}); break;
      default: pts.push_back({0.5 * b.sx, u(rng) * b.sy, h(rng) * b.sz}); break;
    }
  }
  return pts;
}

PointCloudFrame make_frame(const std::vector<Point3>& pts, const std::vector<std::int32_t>* labels) {
  PointCloudFrame f;
  f.coords = from_points(pts, DType::kFloat32);
  std::vector<float> heights(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) heights[i] = static_cast<float>(pts[i][2]);
  f.feats = Tensor::from_vector<float>({pts.size(), 1}, std::move(heights));
  if (labels != nullptr) f.labels = *labels;
  return f;
}

// Base shapes, per-frame translation and fresh jitter.
std::vector<PointCloudFrame> animate(const std::vector<Point3>& base,
                                     const std::vector<Point3>& velocity_per_point,
                                     const std::vector<std::int32_t>* labels, std::size_t frames,
                                     double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
  std::vector<PointCloudFrame> out;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<Point3> pts(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        pts[i][c] = base[i][c] + static_cast<double>(t) * velocity_per_point[i][c];
        if (sigma > 0) pts[i][c] += noise(rng);
      }
    }
    out.push_back(make_frame(pts, labels));
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_objects < 1 || frames < 1 || object_classes < 1) {
    throw ContractError("SceneSpec: object, frame and class counts must be >= 1");
  }
  if (object_point_counts.empty()) throw ContractError("SceneSpec: object_point_counts is empty");
  for (std::size_t c : object_point_counts) {
    if (c < 1) throw ContractError("SceneSpec: every object needs at least one point");
  }
  if (min_speed < 0 || max_speed < min_speed) throw ContractError("SceneSpec: bad speed range");
  if (noise_sigma < 0 || !(extent > 0)) throw ContractError("SceneSpec: bad noise or extent");
}

std::size_t SceneSpec::points_per_frame() const {
  std::size_t n = num_static_points;
  for (std::size_t i = 0; i < num_objects; ++i) {
    n += object_point_counts[i % object_point_counts.size()];
  }
  return n;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<Point3> seg_scene_velocities(const SceneSpec& spec) {
  // Velocities come from their own stream so they do not depend on counts.
  std::mt19937_64 rng(derive_seed(spec.seed, 0x5e1));
  std::uniform_real_distribution<double> speed(spec.min_speed, spec.max_speed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<Point3> v;
  for (std::size_t i = 0; i < spec.num_objects; ++i) {
    const double s = speed(rng);
    const double a = angle(rng);
    v.push_back({s * std::cos(a), s * std::sin(a), 0.0});
  }
  return v;
}

PointCloudSequence gen_seg_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double half = spec.extent / 2;
  std::uniform_real_distribution<double> ground(-half, half);
  std::vector<Point3> base;
  std::vector<Point3> vel;
  std::vector<std::int32_t> labels;
  for (std::size_t i = 0; i < spec.num_static_points; ++i) {
    base.push_back({ground(rng), ground(rng), 0.0});
    vel.push_back({0, 0, 0});
    labels.push_back(0);
  }
  const auto velocities = seg_scene_velocities(spec);
  // Object centers on a jittered ring keep objects apart.
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double ring = 0.45 * half;
  const double phi0 = phase(rng);
  for (std::size_t i = 0; i < spec.num_objects; ++i) {
    const std::size_t cls = 1 + i % spec.object_classes;
    const double phi =
        phi0 + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(spec.num_objects);
    const double cx = (spec.num_objects == 1 ? 0.0 : ring * std::cos(phi)) + jitter(rng);
    const double cy = (spec.num_objects == 1 ? 0.0 : ring * std::sin(phi)) + jitter(rng);
    const std::size_t count = spec.object_point_counts[i % spec.object_point_counts.size()];
    for (const Point3& p : sample_box_surface(class_shape(cls), count, rng)) {
      base.push_back({cx + p[0], cy + p[1], kObjectLift + p[2]});
      vel.push_back(velocities[i]);
      labels.push_back(static_cast<std::int32_t>(cls));
    }
  }
  PointCloudSequence seq;
  seq.num_classes = spec.num_classes();
  seq.frames = animate(base, vel, &labels, spec.frames, spec.noise_sigma, rng);
  return seq;
}

Point3 motion_direction(std::size_t class_id) {
  switch (class_id % kMotionDirections) {
    case 0: return {1, 0, 0};
    case 1: return {-1, 0, 0};
    case 2: return {0, 1, 0};
    default: return {0, -1, 0};
  }
}

LabeledSequence gen_cls_scene(const SceneSpec& spec, std::size_t class_id) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> dims(0.3, 0.8);
  std::uniform_real_distribution<double> start(-0.5, 0.5);
  std::uniform_real_distribution<double> speed(spec.min_speed, spec.max_speed);
  const double half = spec.extent / 2;
  std::uniform_real_distribution<double> ground(-half, half);
  std::vector<Point3> base;
  std::vector<Point3> vel;
  for (std::size_t i = 0; i < spec.num_static_points; ++i) {
    base.push_back({ground(rng), ground(rng), 0.0});
    vel.push_back({0, 0, 0});
  }
  const BoxShape shape{dims(rng), dims(rng), dims(rng)};
  const double cx = start(rng);
  const double cy = start(rng);
  const double s = speed(rng);
  const Point3 dir = motion_direction(class_id);
  for (const Point3& p : sample_box_surface(shape, spec.object_point_counts[0], rng)) {
    base.push_back({cx + p[0], cy + p[1], kObjectLift + p[2]});
    vel.push_back({s * dir[0], s * dir[1], s * dir[2]});
  }
  LabeledSequence out;
  out.sequence.num_classes = 0;
  out.sequence.frames = animate(base, vel, nullptr, spec.frames, spec.noise_sigma, rng);
  out.label = static_cast<std::int32_t>(class_id % kMotionDirections);
  return out;
}

std::vector<LabeledSequence> gen_cls_dataset(const SceneSpec& spec, std::size_t count,
                                             std::size_t num_classes) {
  if (num_classes < 1 || num_classes > kMotionDirections) {
    throw ContractError("gen_cls_dataset: between 1 and 4 motion classes");
  }
  std::vector<LabeledSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec s = spec;
    s.seed = derive_seed(spec.seed, i);
    out.push_back(gen_cls_scene(s, i % num_classes));
  }
  return out;
}

std::vector<PointCloudSequence> gen_seg_dataset(const SceneSpec& spec, std::size_t count) {
  std::vector<PointCloudSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec s = spec;
    s.seed = derive_seed(spec.seed, i);
    out.push_back(gen_seg_scene(s));
  }
  return out;
}

Tensor depth_backproject(const Tensor& depth, const Intrinsics& k) {
  if (!(k.fx > 0) || !(k.fy > 0)) throw ContractError("depth_backproject: fx and fy must be > 0");
  if (depth.rank() != 2) throw DimensionError("depth_backproject: depth must be [H, W]");
  const std::size_t h = depth.dim(0);
  const std::size_t w = depth.dim(1);
  const auto z = depth.to_vector();
  std::vector<double> pts;
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const double d = z[v * w + u];
      if (!(d > 0) || !std::isfinite(d)) continue;
      pts.push_back((static_cast<double>(u) - k.cx) * d / k.fx);
      pts.push_back((static_cast<double>(v) - k.cy) * d / k.fy);
      pts.push_back(d);
    }
  }
  return Tensor::from_values({pts.size() / 3, 3}, pts, depth.dtype());
}

}  // namespace pst2
