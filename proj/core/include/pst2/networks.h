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
#include <random>
#include <span>
#include <vector>

#include "pst2/nn.h"
#include "pst2/point_ops.h"
#include "pst2/re_module.h"
#include "pst2/stsa.h"

namespace pst2 {

/// One set-abstraction stage of the encoder.
struct SAStageConfig {
  std::size_t points = 0;  // seeds sampled at this stage
  double radius = 0.5;
  std::size_t k = 16;
  std::vector<std::size_t> mlp;
};

/// Encoder-decoder segmentation network: set-abstraction stages, optional
/// resolution embedding, optional self-attention across frames, and
/// feature-propagation stages back to every input point.
struct SegNetConfig {
  std::size_t feat_width = 1;
  std::size_t num_classes = 3;
  std::vector<SAStageConfig> stages;
  bool use_re = true;
  REConfig re;
  bool use_stsa = true;
  std::size_t stsa_dim = 128;
  std::size_t window = 3;
  std::size_t stride = 1;
  /// Decoder MLPs, coarse to fine, one per set-abstraction stage.
  std::vector<std::vector<std::size_t>> fp_mlps;
  /// Decoder MLP from the resolution-embedding level to the last stage.
  std::vector<std::size_t> re_fp_mlp{128};
  /// Hidden widths of the pointwise classifier (the class layer is added).
  std::vector<std::size_t> head_mlp{64};
  std::size_t interp_neighbors = 3;

  /// Two stages [256, 64], token width 128, three frames.
  static SegNetConfig desk();
  /// Four stages [2048, 512, 128, 64].
  static SegNetConfig full();

  void validate() const;
  std::size_t encoder_width() const;
};

/// Everything about a sequence that depends only on coordinates, computed
/// once and reused across training steps.
struct SegGeometry {
  std::vector<Tensor> level_coords;  // level s >= 1 (index s - 1); shared by all frames
  std::vector<NeighborhoodGrouping> first_stage;  // per frame
  std::vector<NeighborhoodGrouping> upper_stages;  // stages 2..S, shared
  NeighborhoodGrouping re_grouping;
  InterpolationWeights re_to_top;                 // RE level -> stage S
  std::vector<InterpolationWeights> level_up;     // stage s+1 -> stage s, index s - 1
  std::vector<InterpolationWeights> to_points;    // per frame: stage 1 -> input points
};

struct SegPrediction {
  Tensor logits;                     // [T, n, C]
  std::vector<std::int32_t> labels;  // argmax, frame-major, length T * n
};

class SegNet {
 public:
  SegNet(SegNetConfig cfg, DType dtype, std::uint64_t seed);

  const SegNetConfig& config() const { return cfg_; }
  DType dtype() const { return dtype_; }

  SegGeometry prepare(const PointCloudSequence& seq) const;
  /// Per-frame logits [n_t, C].
  std::vector<Var> forward(Tape& tape, const PointCloudSequence& seq, const SegGeometry& geo);
  std::vector<Var> forward(Tape& tape, const PointCloudSequence& seq);

  std::vector<Param*> params();

 private:
  SegNetConfig cfg_;
  DType dtype_;
  std::vector<Mlp> sa_mlps_;
  ResolutionEmbedding re_;
  STSAParams stsa_;
  Mlp re_fp_;
  std::vector<Mlp> fp_mlps_;
  Mlp head_;
};

SegPrediction seg_forward(const PointCloudSequence& seq, SegNet& net);
SegPrediction seg_forward(const PointCloudSequence& seq, SegNet& net, const SegGeometry& geo);

enum class TemporalMode { kStsa, kMeanPool };

/// Sequence classifier: per-frame set abstraction around first-frame seeds,
/// temporal fusion, global max pool and an MLP head.
struct ClsNetConfig {
  std::size_t feat_width = 0;
  std::size_t num_classes = 4;
  std::size_t seeds = 16;
  double radius = 0.7;
  std::size_t k = 16;
  std::vector<std::size_t> sa_mlp{32, 64};
  TemporalMode temporal = TemporalMode::kStsa;
  std::size_t stsa_dim = 64;
  std::size_t window = 3;
  std::size_t stride = 1;
  std::vector<std::size_t> head_mlp{64};

  static ClsNetConfig desk();
  void validate() const;
};

/// Per-frame groupings around seeds sampled from the first frame.
struct ClsGeometry {
  std::vector<NeighborhoodGrouping> per_frame;
};

class ClsNet {
 public:
  ClsNet(ClsNetConfig cfg, DType dtype, std::uint64_t seed);

  const ClsNetConfig& config() const { return cfg_; }
  DType dtype() const { return dtype_; }

  ClsGeometry prepare(const PointCloudSequence& seq) const;
  /// Logits [1, C].
  Var forward(Tape& tape, const PointCloudSequence& seq, const ClsGeometry& geo);
  Var forward(Tape& tape, const PointCloudSequence& seq);

  std::vector<Param*> params();

 private:
  ClsNetConfig cfg_;
  DType dtype_;
  Mlp sa_;
  STSAParams stsa_;
  Mlp head_;
};

/// Class logits [C].
Tensor cls_forward(const PointCloudSequence& seq, ClsNet& net);

}  // namespace pst2
