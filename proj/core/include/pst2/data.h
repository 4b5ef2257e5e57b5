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
#include <cstdint>
#include <string>
#include <vector>

#include "pst2/point_ops.h"

namespace pst2 {

/// Parameters of a synthetic scene. A fixed seed fully determines the
/// generated sequence.
struct SceneSpec {
  std::size_t num_static_points = 320;
  std::size_t num_objects = 2;
  std::vector<std::size_t> object_point_counts{96, 96};
  double min_speed = 0.05;  // units per frame
  double max_speed = 0.15;
  double noise_sigma = 0.01;
  std::size_t frames = 3;
  /// Object i gets class 1 + (i mod object_classes); the ground is class 0.
  std::size_t object_classes = 2;
  double extent = 4.0;  // ground plane side length
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t num_classes() const { return object_classes + 1; }
  std::size_t points_per_frame() const;
};

/// Ground plane (class 0) plus rigid box-shaped objects translating at
/// constant velocity, with fresh Gaussian jitter every frame. Point
/// features are the height above ground.
PointCloudSequence gen_seg_scene(const SceneSpec& spec);

/// Velocities used for each object by gen_seg_scene, units per frame.
std::vector<Point3> seg_scene_velocities(const SceneSpec& spec);

inline constexpr std::size_t kMotionDirections = 4;

/// Unit direction of motion class `class_id`: +x, -x, +y, -y.
Point3 motion_direction(std::size_t class_id);

struct LabeledSequence {
  PointCloudSequence sequence;
  std::int32_t label = 0;
};

/// One object moving along motion_direction(class_id), on an optional static
/// ground patch. Uses object_point_counts[0] points for the object.
LabeledSequence gen_cls_scene(const SceneSpec& spec, std::size_t class_id);

/// `count` sequences, class i mod `num_classes` for sequence i, each with a
/// seed derived from spec.seed and i.
std::vector<LabeledSequence> gen_cls_dataset(const SceneSpec& spec, std::size_t count,
                                             std::size_t num_classes = kMotionDirections);
std::vector<PointCloudSequence> gen_seg_dataset(const SceneSpec& spec, std::size_t count);

/// Stream-splitting helper for reproducible per-item seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct Intrinsics {
  double fx = 1;
  double fy = 1;
  double cx = 0;
  double cy = 0;
};

/// Pinhole back-projection of a depth map [H, W] in meters. Pixels with
/// zero or non-finite depth are dropped. Returns [count, 3].
Tensor depth_backproject(const Tensor& depth, const Intrinsics& k);

}  // namespace pst2
