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

#include "pst2/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pst2/config.h"
#include "pst2/data.h"
#include "pst2/errors.h"
#include "pst2/networks.h"
#include "pst2/point_ops.h"
#include "pst2/re_module.h"
#include "pst2/stsa.h"

namespace pst2 {
namespace {

constexpr DType kF64 = DType::kFloat64;

double projected_loss(FdProblem& p, const Tensor& r) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : p.inputs) leaves.push_back(tape.constant(t));
  const Var out = p.fn(tape, leaves);
  const auto o = out.value().to_vector();
  const auto w = r.to_vector();
  double acc = 0;
  for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * w[i];
  return acc;
}

std::vector<std::size_t> pick_coords(std::size_t numel, std::size_t max_coords, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(numel);
  std::iota(idx.begin(), idx.end(), 0);
  if (numel > max_coords) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_coords);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Returns (analytic, numeric) for one tensor slot.
void compare_tensor(Tensor& value, const Tensor& analytic, FdProblem& p, const Tensor& r,
                    std::size_t max_coords, double h, std::mt19937_64& rng, double& diff2,
                    double& a2, double& n2, std::size_t& checked) {
  const auto grad = analytic.to_vector();
  for (std::size_t i : pick_coords(value.numel(), max_coords, rng)) {
    auto data = value.mutable_data<double>();
    const double orig = data[i];
    data[i] = orig + h;
    const double up = projected_loss(p, r);
    value.mutable_data<double>()[i] = orig - h;
    const double down = projected_loss(p, r);
    value.mutable_data<double>()[i] = orig;
    const double num = (up - down) / (2 * h);
    diff2 += (grad[i] - num) * (grad[i] - num);
    a2 += grad[i] * grad[i];
    n2 += num * num;
    ++checked;
  }
}

Tensor randn(Shape s, std::mt19937_64& rng) { return Tensor::normal(std::move(s), 0.0, 1.0, kF64, rng); }

std::size_t rdim(std::mt19937_64& rng, std::size_t lo = 2, std::size_t hi = 5) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Values kept away from zero so relu/max kinks are not straddled by +-h.
Tensor away_from_zero(Tensor t) {
  for (auto& v : t.mutable_data<double>()) {
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  }
  return t;
}

Tensor rand_coords(std::size_t n, double extent, std::mt19937_64& rng) {
  return Tensor::uniform({n, 3}, 0.0, extent, DType::kFloat32, rng);
}

struct Case {
  using Maker = std::function<FdProblem(std::mt19937_64&, std::size_t)>;
  Case(std::string n, std::function<FdProblem(std::mt19937_64&)> f)
      : name(std::move(n)), make([f](std::mt19937_64& g, std::size_t) { return f(g); }) {}
  Case(std::string n, Maker f) : name(std::move(n)), make(std::move(f)) {}

  std::string name;
  Maker make;
};

FdProblem unary(Tensor x, std::function<Var(const Var&)> f) {
  FdProblem p;
  p.inputs = {std::move(x)};
  p.fn = [f](Tape&, std::span<const Var> v) { return f(v[0]); };
  return p;
}

FdProblem binary(Tensor a, Tensor b, std::function<Var(const Var&, const Var&)> f) {
  FdProblem p;
  p.inputs = {std::move(a), std::move(b)};
  p.fn = [f](Tape&, std::span<const Var> v) { return f(v[0], v[1]); };
  return p;
}

template <typename T>
std::shared_ptr<T> own(FdProblem& p, std::shared_ptr<T> obj) {
  p.owner = obj;
  return obj;
}

std::vector<Case> tensor_cases() {
  std::vector<Case> c;
  c.push_back({"add_broadcast", [](auto& g) {
                 const std::size_t r = rdim(g), k = rdim(g);
                 return binary(randn({r, k}, g), randn({k}, g), add);
               }});
  c.push_back({"sub_broadcast", [](auto& g) {
                 const std::size_t r = rdim(g), k = rdim(g);
                 return binary(randn({r, 1}, g), randn({1, k}, g), sub);
               }});
  c.push_back({"mul_broadcast", [](auto& g) {
                 const std::size_t b = rdim(g), r = rdim(g), k = rdim(g);
                 return binary(randn({b, r, k}, g), randn({r, 1}, g), mul);
               }});
  c.push_back({"scale", [](auto& g) {
                 const double s = std::uniform_real_distribution<double>(-2, 2)(g);
                 return unary(randn({rdim(g), rdim(g)}, g), [s](const Var& x) { return scale(x, s); });
               }});
  c.push_back({"divide", [](auto& g) {
                 const double s = std::uniform_real_distribution<double>(0.5, 4)(g);
                 return unary(randn({rdim(g), rdim(g)}, g), [s](const Var& x) { return divide(x, s); });
               }});
  c.push_back({"relu", [](auto& g) { return unary(away_from_zero(randn({rdim(g), rdim(g)}, g)), relu); }});
  c.push_back({"matmul", [](auto& g) {
                 const std::size_t p = rdim(g), q = rdim(g), r = rdim(g);
                 return binary(randn({p, q}, g), randn({q, r}, g), matmul);
               }});
  c.push_back({"matmul_batched", [](auto& g) {
                 const std::size_t b = rdim(g), p = rdim(g), q = rdim(g), r = rdim(g);
                 return binary(randn({b, p, q}, g), randn({q, r}, g), matmul);
               }});
  c.push_back({"transpose_last2", [](auto& g) {
                 return unary(randn({rdim(g), rdim(g), rdim(g)}, g), transpose_last2);
               }});
  c.push_back({"reshape", [](auto& g) {
                 const std::size_t a = rdim(g), b = rdim(g);
                 return unary(randn({a, b, 2}, g), [a, b](const Var& x) { return reshape(x, {2 * b, a}); });
               }});
  c.push_back({"concat", [](auto& g) {
                 const std::size_t r = rdim(g);
                 return binary(randn({r, rdim(g)}, g), randn({r, rdim(g)}, g), [](const Var& a, const Var& b) {
                   const Var parts[] = {a, b};
                   return concat(parts, 1);
                 });
               }});
  c.push_back({"slice", [](auto& g) {
                 const std::size_t k = rdim(g, 3, 6);
                 return unary(randn({rdim(g), k}, g), [k](const Var& x) { return slice(x, 1, 1, k - 1); });
               }});
  c.push_back({"split", [](auto& g) {
                 const std::size_t a = rdim(g, 1, 3), b = rdim(g, 1, 3);
                 return unary(randn({a + b, rdim(g)}, g), [a, b](const Var& x) {
                   const std::size_t sizes[] = {a, b};
                   auto parts = split(x, 0, sizes);
                   const Var joined[] = {parts[1], scale(parts[0], 3.0)};
                   return concat(joined, 0);
                 });
               }});
  c.push_back({"max_over_axis", [](auto& g) {
                 return unary(randn({rdim(g), rdim(g), rdim(g)}, g), [](const Var& x) { return max_over_axis(x, 1); });
               }});
  c.push_back({"mean_over_axis", [](auto& g) {
                 return unary(randn({rdim(g), rdim(g)}, g), [](const Var& x) { return mean_over_axis(x, 0); });
               }});
  c.push_back({"sum", [](auto& g) { return unary(randn({rdim(g), rdim(g)}, g), sum); }});
  c.push_back({"mean", [](auto& g) { return unary(randn({rdim(g), rdim(g)}, g), mean); }});
  c.push_back({"softmax_rows", [](auto& g) { return unary(randn({rdim(g), rdim(g)}, g), softmax_rows); }});
  c.push_back({"layer_norm", [](auto& g) {
                 const std::size_t d = rdim(g, 3, 6);
                 FdProblem p;
                 p.inputs = {randn({rdim(g), d}, g), randn({d}, g), randn({d}, g)};
                 p.fn = [](Tape&, std::span<const Var> v) { return layer_norm(v[0], v[1], v[2]); };
                 return p;
               }});
  c.push_back({"gather_rows", [](auto& g) {
                 const std::size_t n = rdim(g);
                 std::vector<std::int64_t> idx(rdim(g, 4, 8));
                 for (auto& i : idx) i = std::uniform_int_distribution<std::int64_t>(0, n - 1)(g);
                 return unary(randn({n, rdim(g)}, g), [idx](const Var& x) { return gather_rows(x, idx); });
               }});
  c.push_back({"weighted_gather", [](auto& g) {
                 const std::size_t n = rdim(g), q = rdim(g), p = 3;
                 std::vector<std::int64_t> idx(q * p);
                 std::vector<double> w(q * p);
                 for (auto& i : idx) i = std::uniform_int_distribution<std::int64_t>(0, n - 1)(g);
                 for (auto& v : w) v = std::uniform_real_distribution<double>(0, 1)(g);
                 return unary(randn({n, rdim(g)}, g),
                              [idx, w, p](const Var& x) { return weighted_gather(x, idx, w, p); });
               }});
  c.push_back({"cross_entropy", [](auto& g) {
                 const std::size_t r = rdim(g, 3, 6), k = rdim(g);
                 std::vector<std::int32_t> labels(r);
                 for (auto& l : labels) l = std::uniform_int_distribution<std::int32_t>(0, k - 1)(g);
                 std::optional<std::int32_t> ignore;
                 if (g() % 2) ignore = labels.back() == labels.front() ? -1 : labels.back();
                 return unary(randn({r, k}, g),
                              [labels, ignore](const Var& x) { return cross_entropy(x, labels, ignore); });
               }});
  c.push_back({"mlp", [](auto& g) {
                 FdProblem p;
                 const std::size_t in = rdim(g);
                 const std::size_t widths[] = {rdim(g, 3, 6), rdim(g)};
                 auto mlp = own(p, std::make_shared<Mlp>("mlp", in, widths, Activation::kRelu, kF64, g));
                 mlp->collect_params(p.params);
                 p.inputs = {randn({rdim(g), in}, g)};
                 p.fn = [mlp](Tape& t, std::span<const Var> v) { return mlp->forward(t, v[0]); };
                 return p;
               }});
  return c;
}

std::vector<Case> point_cases() {
  std::vector<Case> c;
  c.push_back({"set_abstraction", [](auto& g) {
                 FdProblem p;
                 const std::size_t n = 24, f = 3;
                 Tensor coords = rand_coords(n, 1.0, g);
                 auto grouping = ball_query(fps(coords, 8), coords, 0.4, 6);
                 const std::size_t widths[] = {8, 8};
                 auto mlp = own(p, std::make_shared<Mlp>("sa", f + 3, widths, Activation::kRelu, kF64, g));
                 mlp->collect_params(p.params);
                 p.inputs = {randn({n, f}, g)};
                 p.fn = [mlp, coords, grouping](Tape& t, std::span<const Var> v) {
                   return set_abstraction(t, v[0], coords, grouping, *mlp);
                 };
                 return p;
               }});
  c.push_back({"set_abstraction_coords_only", [](auto& g) {
                 FdProblem p;
                 Tensor coords = rand_coords(20, 1.0, g);
                 auto grouping = ball_query(fps(coords, 6), coords, 0.5, 5);
                 const std::size_t widths[] = {6, 4};
                 auto mlp = own(p, std::make_shared<Mlp>("sa", 3, widths, Activation::kRelu, kF64, g));
                 mlp->collect_params(p.params);
                 p.fn = [mlp, coords, grouping](Tape& t, std::span<const Var>) {
                   return set_abstraction(t, Var(), coords, grouping, *mlp);
                 };
                 return p;
               }});
  c.push_back({"interpolate_features", [](auto& g) {
                 FdProblem p;
                 Tensor targets = rand_coords(rdim(g, 8, 16), 1.0, g);
                 Tensor sources = rand_coords(rdim(g, 4, 7), 1.0, g);
                 p.inputs = {randn({sources.dim(0), rdim(g)}, g)};
                 p.fn = [targets, sources](Tape&, std::span<const Var> v) {
                   return interpolate_features(targets, FeatureMap{sources, v[0], 0}, 3);
                 };
                 return p;
               }});
  return c;
}

REConfig tiny_re() {
  REConfig r;
  r.feature_mlp = {6};
  r.resolution_mlp = {6};
  r.output_dim = 6;
  r.radius = 0.6;
  r.k = 4;
  return r;
}

std::vector<Case> re_cases() {
  std::vector<Case> c;
  c.push_back({"resolution_block", [](auto& g) {
                 FdProblem p;
                 const std::size_t m = rdim(g, 5, 9), d = rdim(g, 2, 4);
                 const std::size_t widths[] = {6};
                 auto f = own(p, std::make_shared<Mlp>("f", 2 * d, widths, Activation::kRelu, kF64, g));
                 f->collect_params(p.params);
                 p.inputs = {randn({m, d}, g)};
                 p.fn = [f](Tape& t, std::span<const Var> v) { return resolution_block(t, pad_rows_to_even(v[0]), *f); };
                 return p;
               }});
  c.push_back({"fuse", [](auto& g) {
                 FdProblem p;
                 const std::size_t m = rdim(g, 3, 6), d = rdim(g, 3, 6);
                 const std::size_t widths[] = {d, 2};
                 auto gamma = own(p, std::make_shared<Mlp>("gamma", 2 * d, widths, Activation::kNone, kF64, g));
                 gamma->collect_params(p.params);
                 p.inputs = {randn({m, d}, g), randn({m, d}, g)};
                 p.fn = [gamma](Tape& t, std::span<const Var> v) { return re_fuse(t, v[0], v[1], *gamma).first; };
                 return p;
               }});
  c.push_back({"fuse_weights", [](auto& g) {
                 FdProblem p;
                 const std::size_t m = rdim(g, 3, 6), d = rdim(g, 3, 6);
                 const std::size_t widths[] = {d, 2};
                 auto gamma = own(p, std::make_shared<Mlp>("gamma", 2 * d, widths, Activation::kNone, kF64, g));
                 gamma->collect_params(p.params);
                 p.inputs = {randn({m, d}, g), randn({m, d}, g)};
                 p.fn = [gamma](Tape& t, std::span<const Var> v) { return re_fuse(t, v[0], v[1], *gamma).second; };
                 return p;
               }});
  c.push_back({"feature_block", [](auto& g) {
                 FdProblem p;
                 const std::size_t m = rdim(g, 8, 12), d = 4;
                 Tensor seeds = rand_coords(m, 1.0, g);
                 auto re = own(p, std::make_shared<ResolutionEmbedding>("re", d, tiny_re(), kF64, g));
                 re->feature_mlp().collect_params(p.params);
                 const auto grouping = re->grouping_for(seeds);
                 p.inputs = {randn({m, d}, g)};
                 p.fn = [re, seeds, grouping](Tape& t, std::span<const Var> v) {
                   return re->feature_block(t, FeatureMap{seeds, v[0], 0}, grouping);
                 };
                 return p;
               }});
  c.push_back({"resolution_embedding", [](auto& g) {
                 FdProblem p;
                 const std::size_t m = rdim(g, 8, 12), d = 4;
                 Tensor seeds = rand_coords(m, 1.0, g);
                 auto re = own(p, std::make_shared<ResolutionEmbedding>("re", d, tiny_re(), kF64, g));
                 re->collect_params(p.params);
                 p.inputs = {randn({m, d}, g)};
                 p.fn = [re, seeds](Tape& t, std::span<const Var> v) {
                   return re->forward(t, FeatureMap{seeds, v[0], 0}).fused;
                 };
                 return p;
               }});
  return c;
}

struct StsaFixture {
  STSAParams params;
  std::size_t frames = 0;
  std::size_t seeds = 0;
};

FdProblem stsa_problem(std::mt19937_64& g,
                       std::function<Var(Tape&, std::vector<Var>, STSAParams&)> body) {
  FdProblem p;
  auto fx = std::make_shared<StsaFixture>();
  p.owner = fx;
  fx->frames = rdim(g, 2, 4);
  fx->seeds = rdim(g, 2, 4);
  const std::size_t in = rdim(g, 2, 4), d = rdim(g, 3, 6);
  const std::size_t window = std::uniform_int_distribution<std::size_t>(1, fx->frames)(g);
  fx->params = STSAParams("stsa", {in, d, window, 1}, kF64, g);
  fx->params.collect_params(p.params);
  for (std::size_t t = 0; t < fx->frames; ++t) p.inputs.push_back(randn({fx->seeds, in}, g));
  p.fn = [fx, body](Tape& t, std::span<const Var> v) {
    return body(t, std::vector<Var>(v.begin(), v.end()), fx->params);
  };
  return p;
}

std::vector<Case> stsa_cases() {
  std::vector<Case> c;
  c.push_back({"patch_division", [](auto& g) {
                 return stsa_problem(g, [](Tape& t, std::vector<Var> f, STSAParams& sp) {
                   return patch_division(t, f, sp).tokens;
                 });
               }});
  c.push_back({"self_attention", [](auto& g) {
                 return stsa_problem(g, [](Tape& t, std::vector<Var> f, STSAParams& sp) {
                   return self_attention(t, patch_division(t, f, sp), sp).first;
                 });
               }});
  c.push_back({"stsa_forward", [](auto& g) {
                 return stsa_problem(g, [](Tape& t, std::vector<Var> f, STSAParams& sp) {
                   return stsa_forward(t, patch_division(t, f, sp), sp);
                 });
               }});
  c.push_back({"scatter_tokens", [](auto& g) {
                 return stsa_problem(g, [](Tape& t, std::vector<Var> f, STSAParams& sp) {
                   const PatchSet ps = patch_division(t, f, sp);
                   const auto frames = scatter_tokens(stsa_forward(t, ps, sp), ps);
                   return concat(frames, 0);
                 });
               }});
  return c;
}

SceneSpec tiny_scene(std::uint64_t seed, std::size_t frames) {
  SceneSpec s;
  s.num_static_points = 24;
  s.num_objects = 2;
  s.object_point_counts = {8, 8};
  s.extent = 2.0;
  s.frames = frames;
  s.seed = seed;
  return s;
}

struct SegFixture {
  SegFixture(SegNetConfig cfg, std::uint64_t seed, PointCloudSequence s)
      : net(std::move(cfg), kF64, seed), seq(std::move(s)), geo(net.prepare(seq)) {}
  SegNet net;
  PointCloudSequence seq;
  SegGeometry geo;
};

std::vector<Case> seg_cases() {
  std::vector<Case> c;
  c.push_back({"seg_forward", [](std::mt19937_64& g, std::size_t variant) {
                 SegNetConfig cfg;
                 cfg.feat_width = 1;
                 cfg.num_classes = 3;
                 cfg.stages = {{12, 0.6, 6, {8}}, {6, 1.0, 6, {8}}};
                 cfg.use_re = variant % 2 == 0;
                 cfg.use_stsa = (variant / 2) % 2 == 0;
                 cfg.re = tiny_re();
                 cfg.re.output_dim = 8;
                 cfg.re.feature_mlp = {8};
                 cfg.re.resolution_mlp = {8};
                 cfg.stsa_dim = 8;
                 cfg.window = 2;
                 cfg.fp_mlps = {{8}, {8}};
                 cfg.re_fp_mlp = {8};
                 cfg.head_mlp = {8};
                 FdProblem p;
                 auto fx = own(p, std::make_shared<SegFixture>(cfg, g(), gen_seg_scene(tiny_scene(g(), 3))));
                 p.params = fx->net.params();
                 p.fn = [fx](Tape& t, std::span<const Var>) {
                   return concat(fx->net.forward(t, fx->seq, fx->geo), 0);
                 };
                 return p;
               }});
  return c;
}

struct ClsFixture {
  ClsFixture(ClsNetConfig cfg, std::uint64_t seed, PointCloudSequence s)
      : net(std::move(cfg), kF64, seed), seq(std::move(s)), geo(net.prepare(seq)) {}
  ClsNet net;
  PointCloudSequence seq;
  ClsGeometry geo;
};

std::vector<Case> cls_cases() {
  std::vector<Case> c;
  c.push_back({"cls_forward", [](std::mt19937_64& g, std::size_t variant) {
                 ClsNetConfig cfg;
                 cfg.feat_width = 1;
                 cfg.seeds = 6;
                 cfg.radius = 0.5;
                 cfg.k = 6;
                 cfg.sa_mlp = {8};
                 cfg.stsa_dim = 8;
                 cfg.window = 2;
                 cfg.head_mlp = {8};
                 cfg.temporal = variant % 2 == 0 ? TemporalMode::kStsa : TemporalMode::kMeanPool;
                 SceneSpec s = tiny_scene(g(), 4);
                 s.num_static_points = 0;
                 s.object_point_counts = {24};
                 FdProblem p;
                 auto fx = own(p, std::make_shared<ClsFixture>(cfg, g(), gen_cls_scene(s, g() % 4).sequence));
                 p.params = fx->net.params();
                 p.fn = [fx](Tape& t, std::span<const Var>) { return fx->net.forward(t, fx->seq, fx->geo); };
                 return p;
               }});
  return c;
}

std::vector<Case> cases_for(const std::string& module) {
  if (module == "tensor") return tensor_cases();
  if (module == "point-ops") return point_cases();
  if (module == "re") return re_cases();
  if (module == "stsa") return stsa_cases();
  if (module == "seg") return seg_cases();
  if (module == "cls") return cls_cases();
  throw ContractError("gradcheck: unknown module '" + module + "'");
}

}  // namespace

FdResult finite_difference_check(FdProblem& p, std::mt19937_64& rng, std::size_t max_coords, double h) {
  for (const Tensor& t : p.inputs) {
    if (t.dtype() != kF64) throw ContractError("finite_difference_check: inputs must be float64");
  }
  for (const Param* q : p.params) {
    if (q->value.dtype() != kF64) throw ContractError("finite_difference_check: params must be float64");
  }
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : p.inputs) leaves.push_back(tape.leaf(t));
  const Var out = p.fn(tape, leaves);
  const Tensor r = Tensor::normal(out.shape(), 0.0, 1.0, kF64, rng);
  const Var loss = sum(mul(out, tape.constant(r)));
  tape.backward(loss);

  std::vector<Tensor> input_grads;
  for (const Var& l : leaves) input_grads.push_back(tape.grad(l));
  std::vector<Tensor> param_grads;
  const auto bound = tape.param_grads();
  for (Param* q : p.params) {
    Tensor g = Tensor::zeros(q->value.shape(), kF64);
    for (const auto& [bp, bg] : bound) {
      if (bp == q) g = bg;
    }
    param_grads.push_back(g);
  }

  double diff2 = 0, a2 = 0, n2 = 0;
  FdResult res;
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    compare_tensor(p.inputs[i], input_grads[i], p, r, max_coords, h, rng, diff2, a2, n2, res.checked);
  }
  for (std::size_t i = 0; i < p.params.size(); ++i) {
    compare_tensor(p.params[i]->value, param_grads[i], p, r, max_coords, h, rng, diff2, a2, n2,
                   res.checked);
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
  res.rel_err = (a2 == 0 && n2 == 0) ? 0.0 : std::sqrt(diff2) / denom;
  return res;
}

bool GradcheckReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed; });
}

double GradcheckReport::max_error() const {
  double m = 0;
  for (const auto& c : cases) m = std::max(m, c.result.rel_err);
  return m;
}

std::vector<std::string> gradcheck_modules() { return {"tensor", "point-ops", "re", "stsa", "seg", "cls"}; }

GradcheckReport run_gradcheck(const std::string& module, std::size_t instances, double tolerance,
                              std::uint64_t seed) {
  std::vector<std::string> modules;
  if (module == "all") {
    modules = gradcheck_modules();
  } else {
    modules = {module};
  }
  GradcheckReport report;
  report.tolerance = tolerance;
  for (const auto& m : modules) {
    const auto cases = cases_for(m);
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      for (std::size_t i = 0; i < instances; ++i) {
        std::mt19937_64 rng(derive_seed(seed, (fnv1a64(m) + ci) * 1000 + i));
        FdProblem problem = cases[ci].make(rng, i);
        GradcheckCase gc;
        gc.module = m;
        gc.name = cases[ci].name;
        gc.instance = i;
        gc.result = finite_difference_check(problem, rng, m == "seg" || m == "cls" ? 6 : 32);
        gc.passed = std::isfinite(gc.result.rel_err) && gc.result.rel_err < tolerance;
        report.cases.push_back(std::move(gc));
      }
    }
  }
  return report;
}

}  // namespace pst2
