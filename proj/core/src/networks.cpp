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

#include "pst2/networks.h"

#include <algorithm>

#include "pst2/errors.h"

namespace pst2 {
namespace {

std::vector<std::size_t> with_class_layer(std::vector<std::size_t> hidden, std::size_t classes) {
  hidden.push_back(classes);
  return hidden;
}

Var frame_feats(Tape& tape, const PointCloudFrame& frame, DType dtype) {
  if (frame.feat_width() == 0) return Var();
  return tape.constant(frame.feats.astype(dtype));
}

Var interp(const Var& src, const InterpolationWeights& w) {
  return weighted_gather(src, w.idx, w.weights, w.p);
}

Var concat2(const Var& a, const Var& b) {
  if (!b.valid()) return a;
  const Var parts[] = {a, b};
  return concat(parts, 1);
}

}  // namespace

SegNetConfig SegNetConfig::desk() {
  SegNetConfig c;
  c.feat_width = 1;
  c.num_classes = 3;
  c.stages = {{256, 0.5, 16, {32, 64}}, {64, 1.0, 16, {64, 128}}};
  c.re.feature_mlp = {128};
  c.re.resolution_mlp = {128};
  c.re.output_dim = 128;
  c.re.radius = 1.0;
  c.re.k = 16;
  c.stsa_dim = 128;
  c.window = 3;
  c.re_fp_mlp = {128};
  c.fp_mlps = {{128}, {64}};
  c.head_mlp = {64};
  return c;
}

SegNetConfig SegNetConfig::full() {
  SegNetConfig c;
  c.feat_width = 1;
  c.num_classes = 12;
  c.stages = {{2048, 0.5, 32, {32, 32, 64}},
              {512, 1.0, 32, {64, 64, 128}},
              {128, 2.0, 32, {128, 128, 256}},
              {64, 4.0, 32, {256, 256, 512}}};
  c.re.feature_mlp = {512};
  c.re.resolution_mlp = {512};
  c.re.output_dim = 512;
  c.re.radius = 8.0;
  c.re.k = 32;
  c.stsa_dim = 512;
  c.window = 3;
  c.re_fp_mlp = {512};
  c.fp_mlps = {{256, 256}, {256, 256}, {256, 128}, {128, 128, 128}};
  c.head_mlp = {128};
  return c;
}

void SegNetConfig::validate() const {
  if (stages.empty()) throw ContractError("SegNetConfig: at least one set-abstraction stage");
  if (num_classes < 1) throw ContractError("SegNetConfig: num_classes must be >= 1");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].points == 0 || stages[s].mlp.empty() || stages[s].k == 0 ||
        !(stages[s].radius > 0)) {
      throw ContractError("SegNetConfig: stage " + std::to_string(s) + " is incomplete");
    }
    if (s > 0 && stages[s].points >= stages[s - 1].points) {
      throw ContractError("SegNetConfig: stage seed counts must strictly decrease");
    }
  }
  if (fp_mlps.size() != stages.size()) {
    throw ContractError("SegNetConfig: need one decoder stage per encoder stage (" +
                        std::to_string(stages.size()) + "), got " +
                        std::to_string(fp_mlps.size()));
  }
  for (const auto& f : fp_mlps) {
    if (f.empty()) throw ContractError("SegNetConfig: empty decoder MLP");
  }
  if (use_re) {
    re.validate();
    if (re_fp_mlp.empty()) throw ContractError("SegNetConfig: empty RE decoder MLP");
  }
  if (use_stsa) STSAConfig{encoder_width(), stsa_dim, window, stride}.validate();
  if (interp_neighbors == 0) throw ContractError("SegNetConfig: interp_neighbors must be >= 1");
}

std::size_t SegNetConfig::encoder_width() const {
  return use_re ? re.output_dim : stages.back().mlp.back();
}

SegNet::SegNet(SegNetConfig cfg, DType dtype, std::uint64_t seed)
    : cfg_(std::move(cfg)), dtype_(dtype) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = cfg_.feat_width;
  for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
    sa_mlps_.emplace_back("sa" + std::to_string(s + 1), in + 3, cfg_.stages[s].mlp,
                          Activation::kRelu, dtype, rng);
    in = cfg_.stages[s].mlp.back();
  }
  const std::size_t last_width = in;
  if (cfg_.use_re) re_ = ResolutionEmbedding("re", last_width, cfg_.re, dtype, rng);
  std::size_t cur = cfg_.encoder_width();
  if (cfg_.use_stsa) {
    stsa_ = STSAParams("stsa", {cur, cfg_.stsa_dim, cfg_.window, cfg_.stride}, dtype, rng);
    cur = cfg_.stsa_dim;
  }
  if (cfg_.use_re) {
    re_fp_ = Mlp("fp_re", cur + last_width, cfg_.re_fp_mlp, Activation::kRelu, dtype, rng);
    cur = cfg_.re_fp_mlp.back();
  }
  const std::size_t stages = cfg_.stages.size();
  for (std::size_t i = 0; i < stages; ++i) {
    // Decoder stage i lifts level (S - i) onto level (S - i - 1).
    const std::size_t target_level = stages - i - 1;
    const std::size_t skip =
        target_level == 0 ? cfg_.feat_width : cfg_.stages[target_level - 1].mlp.back();
    fp_mlps_.emplace_back("fp" + std::to_string(i + 1), cur + skip, cfg_.fp_mlps[i],
                          Activation::kRelu, dtype, rng);
    cur = cfg_.fp_mlps[i].back();
  }
  head_ = Mlp("head", cur, with_class_layer(cfg_.head_mlp, cfg_.num_classes), Activation::kNone,
              dtype, rng);
}

SegGeometry SegNet::prepare(const PointCloudSequence& seq) const {
  seq.validate();
  if (seq.feat_width() != cfg_.feat_width) {
    throw DimensionError("SegNet: sequence feature width " + std::to_string(seq.feat_width()) +
                         " != configured " + std::to_string(cfg_.feat_width));
  }
  const std::size_t p = cfg_.interp_neighbors;
  SegGeometry g;
  const SeedSet first = fps(seq.frames[0].coords, cfg_.stages[0].points, 0);
  g.level_coords.push_back(first.coords);
  for (const auto& frame : seq.frames) {
    g.first_stage.push_back(
        ball_query(first, frame.coords, cfg_.stages[0].radius, cfg_.stages[0].k));
    g.to_points.push_back(idw_weights(frame.coords, first.coords, p));
  }
  for (std::size_t s = 1; s < cfg_.stages.size(); ++s) {
    const Tensor& below = g.level_coords.back();
    const SeedSet seeds = fps(below, cfg_.stages[s].points, 0);
    g.upper_stages.push_back(ball_query(seeds, below, cfg_.stages[s].radius, cfg_.stages[s].k));
    g.level_up.push_back(idw_weights(below, seeds.coords, p));
    g.level_coords.push_back(seeds.coords);
  }
  if (cfg_.use_re) {
    g.re_grouping = re_.grouping_for(g.level_coords.back());
    g.re_to_top = idw_weights(g.level_coords.back(), g.re_grouping.seeds.coords, p);
  }
  return g;
}

std::vector<Var> SegNet::forward(Tape& tape, const PointCloudSequence& seq,
                                 const SegGeometry& geo) {
  const std::size_t frames = seq.frames.size();
  const std::size_t stages = cfg_.stages.size();
  if (geo.first_stage.size() != frames) throw ContractError("SegNet: geometry/sequence mismatch");
  std::vector<std::vector<Var>> levels(frames);  // [t][s]: level s features, s = 0 input
  std::vector<Var> tops(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const PointCloudFrame& frame = seq.frames[t];
    levels[t].push_back(frame_feats(tape, frame, dtype_));
    Var h = set_abstraction(tape, levels[t][0], frame.coords, geo.first_stage[t], sa_mlps_[0]);
    levels[t].push_back(h);
    for (std::size_t s = 1; s < stages; ++s) {
      h = set_abstraction(tape, h, geo.level_coords[s - 1], geo.upper_stages[s - 1], sa_mlps_[s]);
      levels[t].push_back(h);
    }
    if (cfg_.use_re) {
      FeatureMap fm{geo.level_coords.back(), h, static_cast<int>(t)};
      h = re_.forward(tape, fm, geo.re_grouping).fused;
    }
    tops[t] = h;
  }
  if (cfg_.use_stsa) {
    PatchSet patches = patch_division(tape, tops, stsa_);
    tops = scatter_tokens(stsa_forward(tape, patches, stsa_), patches);
  }
  std::vector<Var> logits;
  for (std::size_t t = 0; t < frames; ++t) {
    Var x = tops[t];
    if (cfg_.use_re) x = re_fp_.forward(tape, concat2(interp(x, geo.re_to_top), levels[t][stages]));
    for (std::size_t i = 0; i < stages; ++i) {
      const std::size_t target = stages - i - 1;
      const InterpolationWeights& w = target == 0 ? geo.to_points[t] : geo.level_up[target - 1];
      x = fp_mlps_[i].forward(tape, concat2(interp(x, w), levels[t][target]));
    }
    logits.push_back(head_.forward(tape, x));
  }
  return logits;
}

std::vector<Var> SegNet::forward(Tape& tape, const PointCloudSequence& seq) {
  return forward(tape, seq, prepare(seq));
}

std::vector<Param*> SegNet::params() {
  std::vector<Param*> out;
  for (Mlp& m : sa_mlps_) m.collect_params(out);
  if (cfg_.use_re) re_.collect_params(out);
  if (cfg_.use_stsa) stsa_.collect_params(out);
  if (cfg_.use_re) re_fp_.collect_params(out);
  for (Mlp& m : fp_mlps_) m.collect_params(out);
  head_.collect_params(out);
  return out;
}

SegPrediction seg_forward(const PointCloudSequence& seq, SegNet& net, const SegGeometry& geo) {
  Tape tape;
  const auto logits = net.forward(tape, seq, geo);
  const std::size_t n = seq.frames[0].size();
  const std::size_t c = net.config().num_classes;
  for (const auto& f : seq.frames) {
    if (f.size() != n) throw DimensionError("seg_forward: frames must share a point count");
  }
  SegPrediction pred;
  pred.logits = Tensor({seq.frames.size(), n, c}, net.dtype());
  pred.labels.reserve(seq.frames.size() * n);
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const auto v = logits[t].value().to_vector();
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 0; j < c; ++j) {
        pred.logits.set_item((t * n + i) * c + j, v[i * c + j]);
        if (v[i * c + j] > v[i * c + best]) best = j;
      }
      pred.labels.push_back(static_cast<std::int32_t>(best));
    }
  }
  return pred;
}

SegPrediction seg_forward(const PointCloudSequence& seq, SegNet& net) {
  return seg_forward(seq, net, net.prepare(seq));
}

ClsNetConfig ClsNetConfig::desk() { return ClsNetConfig{}; }

void ClsNetConfig::validate() const {
  if (num_classes < 1 || seeds < 1 || k < 1 || !(radius > 0) || sa_mlp.empty()) {
    throw ContractError("ClsNetConfig: incomplete configuration");
  }
  if (temporal == TemporalMode::kStsa) {
    STSAConfig{sa_mlp.back(), stsa_dim, window, stride}.validate();
  }
}

ClsNet::ClsNet(ClsNetConfig cfg, DType dtype, std::uint64_t seed)
    : cfg_(std::move(cfg)), dtype_(dtype) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  sa_ = Mlp("sa1", cfg_.feat_width + 3, cfg_.sa_mlp, Activation::kRelu, dtype, rng);
  std::size_t cur = cfg_.sa_mlp.back();
  if (cfg_.temporal == TemporalMode::kStsa) {
    stsa_ = STSAParams("stsa", {cur, cfg_.stsa_dim, cfg_.window, cfg_.stride}, dtype, rng);
    cur = cfg_.stsa_dim;
  }
  head_ = Mlp("head", cur, with_class_layer(cfg_.head_mlp, cfg_.num_classes), Activation::kNone,
              dtype, rng);
}

ClsGeometry ClsNet::prepare(const PointCloudSequence& seq) const {
  seq.validate();
  if (seq.feat_width() != cfg_.feat_width) {
    throw DimensionError("ClsNet: sequence feature width mismatch");
  }
  ClsGeometry g;
  const SeedSet seeds = fps(seq.frames[0].coords, cfg_.seeds, 0);
  for (const auto& frame : seq.frames) {
    g.per_frame.push_back(ball_query(seeds, frame.coords, cfg_.radius, cfg_.k));
  }
  return g;
}

Var ClsNet::forward(Tape& tape, const PointCloudSequence& seq, const ClsGeometry& geo) {
  std::vector<Var> per_frame;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const PointCloudFrame& frame = seq.frames[t];
    per_frame.push_back(set_abstraction(tape, frame_feats(tape, frame, dtype_), frame.coords,
                                        geo.per_frame[t], sa_));
  }
  Var pooled;
  if (cfg_.temporal == TemporalMode::kStsa) {
    PatchSet patches = patch_division(tape, per_frame, stsa_);
    pooled = max_over_axis(stsa_forward(tape, patches, stsa_), 0);
  } else {
    const std::size_t m = per_frame[0].dim(0);
    const std::size_t w = per_frame[0].dim(1);
    std::vector<Var> stacked;
    for (const Var& f : per_frame) stacked.push_back(reshape(f, {1, m, w}));
    pooled = max_over_axis(mean_over_axis(concat(stacked, 0), 0), 0);
  }
  return head_.forward(tape, reshape(pooled, {1, pooled.dim(0)}));
}

Var ClsNet::forward(Tape& tape, const PointCloudSequence& seq) {
  return forward(tape, seq, prepare(seq));
}

std::vector<Param*> ClsNet::params() {
  std::vector<Param*> out;
  sa_.collect_params(out);
  if (cfg_.temporal == TemporalMode::kStsa) stsa_.collect_params(out);
  head_.collect_params(out);
  return out;
}

Tensor cls_forward(const PointCloudSequence& seq, ClsNet& net) {
  Tape tape;
  Var logits = net.forward(tape, seq);
  return logits.value().reshape({net.config().num_classes});
}

}  // namespace pst2
