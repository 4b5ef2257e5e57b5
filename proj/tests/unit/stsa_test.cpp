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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pst2/errors.h"
#include "pst2/stsa.h"
#include "test_util.h"

namespace pst2 {
namespace {

using testing::expect_near;
using testing::naive_matmul;
using testing::naive_mlp;
using testing::randn;

Tensor eye(std::size_t n) {
  Tensor t = Tensor::zeros({n, n}, DType::kFloat64);
  auto v = t.mutable_data<double>();
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1;
  return t;
}

STSAParams make_params(std::size_t in_dim, std::size_t d, std::size_t window, std::size_t stride,
                       std::mt19937_64& rng) {
  STSAConfig cfg;
  cfg.in_dim = in_dim;
  cfg.dim = d;
  cfg.window = window;
  cfg.stride = stride;
  return STSAParams("stsa", cfg, DType::kFloat64, rng);
}

PatchSet tokens_only(Tape& tape, Tensor tokens) {
  PatchSet ps;
  const std::size_t n = tokens.dim(0);
  ps.tokens = tape.constant(std::move(tokens));
  ps.frames = 1;
  ps.seeds = n;
  ps.num_windows = 1;
  for (std::size_t j = 0; j < n; ++j) ps.index_map.push_back({j, 0, 0});
  return ps;
}

std::vector<Var> constant_frames(Tape& tape, std::size_t frames, std::size_t m, std::size_t d,
                                 std::mt19937_64& rng) {
  std::vector<Var> out;
  for (std::size_t t = 0; t < frames; ++t) out.push_back(tape.constant(randn({m, d}, rng)));
  return out;
}

TEST(PatchDivision, SingleFrameIdentityConvKeepsFeatures) {
  std::mt19937_64 rng(21);
  STSAParams p = make_params(4, 4, 1, 1, rng);
  p.temporal_conv.value = eye(4);
  Tape tape;
  auto frames = constant_frames(tape, 1, 6, 4, rng);
  PatchSet ps = patch_division(tape, frames, p);
  EXPECT_TRUE(ps.tokens.value().bit_equal(frames[0].value()));
  EXPECT_EQ(ps.size(), 6u);
}

TEST(PatchDivision, ShapesAndIndexMapMatchNaiveConstruction) {
  std::mt19937_64 rng(22);
  for (auto [frames_n, window, stride] : {std::tuple{5, 3, 1}, {6, 2, 2}, {7, 3, 2}, {4, 4, 1}}) {
    const std::size_t m = 5, in = 3, d = 4;
    STSAParams p = make_params(in, d, window, stride, rng);
    Tape tape;
    auto frames = constant_frames(tape, frames_n, m, in, rng);
    PatchSet ps = patch_division(tape, frames, p);
    const std::size_t windows = (frames_n - window) / stride + 1;
    ASSERT_EQ(ps.num_windows, windows);
    ASSERT_EQ(ps.tokens.shape(), (Shape{windows * m, d}));
    const auto conv = p.temporal_conv.value.to_vector();
    const auto tok = ps.tokens.value().to_vector();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const TokenSource& src = ps.index_map[i];
      EXPECT_EQ(src.seed, i % m);
      EXPECT_EQ(src.window, i / m);
      EXPECT_EQ(src.first_frame, src.window * stride);
      std::vector<double> row;
      for (std::size_t t = src.first_frame; t < src.first_frame + window; ++t) {
        const auto fv = frames[t].value().to_vector();
        row.insert(row.end(), fv.begin() + src.seed * in, fv.begin() + (src.seed + 1) * in);
      }
      const auto want = naive_matmul(row, conv, 1, window * in, d);
      for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(tok[i * d + c], want[c], 1e-12);
    }
  }
}

TEST(PatchDivision, RejectsMisalignedOrMalformedFrames) {
  std::mt19937_64 rng(23);
  STSAParams p = make_params(3, 4, 2, 1, rng);
  Tape tape;
  std::vector<Var> frames = {tape.constant(randn({5, 3}, rng)), tape.constant(randn({4, 3}, rng))};
  EXPECT_THROW(patch_division(tape, frames, p), AlignmentError);
  frames = {tape.constant(randn({5, 3}, rng)), tape.constant(randn({5, 2}, rng))};
  EXPECT_THROW(patch_division(tape, frames, p), DimensionError);
  frames = {tape.constant(randn({5, 3}, rng))};
  EXPECT_THROW(patch_division(tape, frames, p), ContractError);
  EXPECT_THROW(patch_division(tape, std::vector<Var>{}, p), ContractError);
}

TEST(SelfAttention, SingleTokenAttendsToItself) {
  std::mt19937_64 rng(24);
  STSAParams p = make_params(3, 3, 1, 1, rng);
  Tape tape;
  Tensor f = randn({1, 3}, rng);
  auto [out, tr] = self_attention(tape, tokens_only(tape, f), p);
  EXPECT_EQ(tr.attention.to_vector(), std::vector<double>{1.0});
  expect_near(out.value(), naive_matmul(f.to_vector(), p.wv.value.to_vector(), 1, 3, 3), 1e-12);
}

TEST(SelfAttention, IdenticalTokensShareAttentionEvenly) {
  std::mt19937_64 rng(25);
  STSAParams p = make_params(3, 3, 1, 1, rng);
  Tape tape;
  Tensor row = randn({1, 3}, rng);
  const auto r = row.to_vector();
  std::vector<double> two(r);
  two.insert(two.end(), r.begin(), r.end());
  auto [out, tr] = self_attention(tape, tokens_only(tape, Tensor::from_values({2, 3}, two)), p);
  expect_near(tr.attention, {0.5, 0.5, 0.5, 0.5}, 1e-15);
}

TEST(SelfAttention, HandComputedTwoTokens) {
  std::mt19937_64 rng(26);
  STSAParams p = make_params(2, 2, 1, 1, rng);
  p.wq.value = eye(2);
  p.wk.value = eye(2);
  p.wv.value = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tape tape;
  auto [out, tr] = self_attention(tape, tokens_only(tape, Tensor::from_values({2, 2}, {1, 0, 0, 2})), p);
  // Q K^T = [[1, 0], [0, 4]]; scaled by 1/sqrt(2).
  expect_near(tr.scores, {1, 0, 0, 4}, 0);
  const double s = 1 / std::sqrt(2.0);
  const double a00 = std::exp(s) / (std::exp(s) + 1);
  const double a11 = std::exp(4 * s) / (std::exp(4 * s) + 1);
  expect_near(tr.attention, {a00, 1 - a00, 1 - a11, a11}, 1e-15);
  // V = [[1, 2], [6, 8]].
  expect_near(out.value(), {a00 + 6 * (1 - a00), 2 * a00 + 8 * (1 - a00), (1 - a11) + 6 * a11,
                            2 * (1 - a11) + 8 * a11},
              1e-14);
}

TEST(SelfAttention, ZeroQueryGivesUniformAttention) {
  std::mt19937_64 rng(27);
  STSAParams p = make_params(4, 4, 1, 1, rng);
  p.wq.value = Tensor::zeros({4, 4}, DType::kFloat64);
  Tape tape;
  auto [out, tr] = self_attention(tape, tokens_only(tape, randn({7, 4}, rng)), p);
  for (double a : tr.attention.to_vector()) EXPECT_NEAR(a, 1.0 / 7, 1e-15);
}

TEST(SelfAttention, TraceIsConsistent) {
  std::mt19937_64 rng(28);
  for (std::size_t d : {1, 3, 8}) {
    STSAParams p = make_params(d, d, 1, 1, rng);
    Tape tape;
    const std::size_t n = 9;
    auto [out, tr] = self_attention(tape, tokens_only(tape, randn({n, d}, rng)), p);
    const auto scores = tr.scores.to_vector();
    const auto scaled = tr.scaled.to_vector();
    const auto att = tr.attention.to_vector();
    const double root = std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < scores.size(); ++i) EXPECT_EQ(scaled[i], scores[i] / root);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(att[i * n + j], 0);
        total += att[i * n + j];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(SelfAttention, PermutingTokensPermutesOutputs) {
  std::mt19937_64 rng(29);
  STSAParams p = make_params(5, 5, 1, 1, rng);
  const std::size_t n = 12, d = 5;
  Tensor f = randn({n, d}, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto fv = f.to_vector();
  std::vector<double> pf(fv.size());
  for (std::size_t i = 0; i < n; ++i) std::copy_n(fv.begin() + perm[i] * d, d, pf.begin() + i * d);
  Tape tape;
  const auto base = stsa_forward(tape, tokens_only(tape, f), p).value().to_vector();
  const auto moved =
      stsa_forward(tape, tokens_only(tape, Tensor::from_values({n, d}, pf)), p).value().to_vector();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(moved[i * d + c], base[perm[i] * d + c], 1e-5);
}

TEST(SelfAttention, RejectsEmptyOrWrongWidth) {
  std::mt19937_64 rng(30);
  STSAParams p = make_params(4, 4, 1, 1, rng);
  Tape tape;
  EXPECT_THROW(self_attention(tape, tokens_only(tape, Tensor::zeros({0, 4}, DType::kFloat64)), p),
               ContractError);
  EXPECT_THROW(self_attention(tape, tokens_only(tape, randn({3, 5}, rng)), p), DimensionError);
}

TEST(StsaForward, MatchesNaiveComposition) {
  std::mt19937_64 rng(31);
  const std::size_t n = 6, d = 4;
  STSAParams p = make_params(d, d, 1, 1, rng);
  p.ln_gain.value = randn({d}, rng);
  p.ln_bias.value = randn({d}, rng);
  Tensor f = randn({n, d}, rng);
  Tape tape;
  AttentionTrace trace;
  const auto got = stsa_forward(tape, tokens_only(tape, f), p, &trace).value().to_vector();

  const auto fv = f.to_vector();
  const auto v = naive_matmul(fv, p.wv.value.to_vector(), n, d, d);
  auto x = naive_matmul(trace.attention.to_vector(), v, n, n, d);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += fv[i];
  const auto h = naive_mlp(p.ffn, x, n);
  const auto g = p.ln_gain.value.to_vector(), b = p.ln_bias.value.to_vector();
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < d; ++c) mu += h[i * d + c] / d;
    for (std::size_t c = 0; c < d; ++c) var += std::pow(h[i * d + c] - mu, 2) / d;
    for (std::size_t c = 0; c < d; ++c) {
      EXPECT_NEAR(got[i * d + c], (h[i * d + c] - mu) / std::sqrt(var + 1e-5) * g[c] + b[c], 1e-10);
    }
  }
}

TEST(ScatterTokens, CoveringWindowsAreAveraged) {
  // Four frames, window 2, stride 1: windows start at 0, 1, 2. One seed.
  PatchSet ps;
  ps.frames = 4;
  ps.seeds = 1;
  ps.window = 2;
  ps.stride = 1;
  ps.num_windows = 3;
  for (std::size_t w = 0; w < 3; ++w) ps.index_map.push_back({0, w, w});
  Tape tape;
  Var out = tape.constant(Tensor::from_values({3, 1}, {1, 10, 100}));
  auto frames = scatter_tokens(out, ps);
  ASSERT_EQ(frames.size(), 4u);
  expect_near(frames[0].value(), {1}, 1e-15);
  expect_near(frames[1].value(), {5.5}, 1e-15);
  expect_near(frames[2].value(), {55}, 1e-15);
  expect_near(frames[3].value(), {100}, 1e-15);
}

TEST(ScatterTokens, UncoveredFramesBorrowNearestWindow) {
  // Five frames, window 1, stride 2: windows cover frames 0, 2, 4. Two seeds.
  PatchSet ps;
  ps.frames = 5;
  ps.seeds = 2;
  ps.window = 1;
  ps.stride = 2;
  ps.num_windows = 3;
  for (std::size_t w = 0; w < 3; ++w)
    for (std::size_t j = 0; j < 2; ++j) ps.index_map.push_back({j, w, 2 * w});
  Tape tape;
  Var out = tape.constant(Tensor::from_values({6, 1}, {1, 2, 3, 4, 5, 6}));
  auto frames = scatter_tokens(out, ps);
  expect_near(frames[0].value(), {1, 2}, 0);
  expect_near(frames[1].value(), {1, 2}, 0);
  expect_near(frames[2].value(), {3, 4}, 0);
  expect_near(frames[4].value(), {5, 6}, 0);
  EXPECT_THROW(scatter_tokens(tape.constant(Tensor::zeros({5, 1}, DType::kFloat64)), ps),
               DimensionError);
}

TEST(STSAConfig, WindowCounts) {
  STSAConfig cfg;
  cfg.window = 3;
  cfg.stride = 1;
  EXPECT_EQ(cfg.num_windows(3), 1u);
  EXPECT_EQ(cfg.num_windows(16), 14u);
  cfg.stride = 2;
  EXPECT_EQ(cfg.num_windows(8), 3u);
  EXPECT_THROW(cfg.num_windows(2), ContractError);
  cfg.window = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
}

}  // namespace
}  // namespace pst2
