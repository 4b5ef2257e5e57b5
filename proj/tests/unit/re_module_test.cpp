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

#include "pst2/errors.h"
#include "pst2/re_module.h"
#include "test_util.h"

namespace pst2 {
namespace {

using testing::expect_near;
using testing::naive_mlp;
using testing::randn;

REConfig small_config(std::size_t out = 6) {
  REConfig cfg;
  cfg.feature_mlp = {8, out};
  cfg.resolution_mlp = {out};
  cfg.output_dim = out;
  cfg.radius = 0.8;
  cfg.k = 4;
  return cfg;
}

void zero_mlp(Mlp& mlp) {
  for (Linear& l : mlp.layers()) {
    l.weight.value = Tensor::zeros(l.weight.value.shape(), l.weight.value.dtype());
    l.bias.value = Tensor::zeros(l.bias.value.shape(), l.bias.value.dtype());
  }
}

TEST(ResolutionBlock, TwoScalarRowsBecomeOnePair) {
  Tape tape;
  Mlp id = Mlp::identity("id", 2, DType::kFloat64);
  Var h = tape.constant(Tensor::from_values({2, 1}, {1, 2}));
  Var k = resolution_block(tape, h, id);
  EXPECT_EQ(k.shape(), (Shape{1, 2}));
  expect_near(k.value(), {1, 2}, 0);
}

TEST(ResolutionBlock, PairsRowIWithRowIPlusHalf) {
  Tape tape;
  Mlp id = Mlp::identity("id", 4, DType::kFloat64);
  Var h = tape.constant(Tensor::from_values({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  expect_near(resolution_block(tape, h, id).value(), {1, 2, 5, 6, 3, 4, 7, 8}, 0);
}

TEST(ResolutionBlock, KnownWeights) {
  Linear l;
  l.weight = Param("w", Tensor::from_values({2, 1}, {2, -1}));
  l.bias = Param("b", Tensor::from_values({1}, {0.25}));
  l.act = Activation::kRelu;
  Mlp f(std::vector<Linear>{l});
  Tape tape;
  Var h = tape.constant(Tensor::from_values({4, 1}, {1, 3, 0.5, 10}));
  // Pairs (1, .5) and (3, 10): 2 - .5 + .25 = 1.75 and relu(6 - 10 + .25) = 0.
  expect_near(resolution_block(tape, h, f).value(), {1.75, 0}, 1e-15);
}

TEST(ResolutionBlock, OddOrEmptyInputThrows) {
  Tape tape;
  Mlp id = Mlp::identity("id", 2, DType::kFloat64);
  EXPECT_THROW(resolution_block(tape, tape.constant(Tensor::zeros({3, 1}, DType::kFloat64)), id),
               ContractError);
  EXPECT_THROW(resolution_block(tape, tape.constant(Tensor::zeros({0, 1}, DType::kFloat64)), id),
               ContractError);
}

TEST(ResolutionBlock, PadRepeatsLastRow) {
  Tape tape;
  Var h = tape.constant(Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6}));
  Var p = pad_rows_to_even(h);
  EXPECT_EQ(p.shape(), (Shape{4, 2}));
  expect_near(p.value(), {1, 2, 3, 4, 5, 6, 5, 6}, 0);
  EXPECT_EQ(pad_rows_to_even(p).id(), p.id());
}

TEST(ResolutionBlock, MatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  const std::size_t widths[] = {7, 5};
  Mlp f("f", 6, widths, Activation::kRelu, DType::kFloat64, rng);
  Tensor h = randn({10, 3}, rng);
  const auto hv = h.to_vector();
  std::vector<double> g;
  for (std::size_t i = 0; i < 5; ++i) {
    g.insert(g.end(), hv.begin() + i * 3, hv.begin() + i * 3 + 3);
    g.insert(g.end(), hv.begin() + (i + 5) * 3, hv.begin() + (i + 5) * 3 + 3);
  }
  Tape tape;
  expect_near(resolution_block(tape, tape.constant(h), f).value(), naive_mlp(f, g, 5), 1e-12);
}

class ReFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    rng.seed(12);
    re = ResolutionEmbedding("re", 4, small_config(), DType::kFloat64, rng);
  }
  FeatureMap input(Tape& tape, std::size_t m) {
    coords = Tensor::uniform({m, 3}, 0, 1, DType::kFloat64, rng);
    feats = randn({m, 4}, rng);
    return FeatureMap{coords, tape.constant(feats), 0};
  }
  std::mt19937_64 rng;
  ResolutionEmbedding re;
  Tensor coords, feats;
};

TEST_F(ReFixture, OutputShapesHalveSeeds) {
  for (std::size_t m : {1, 2, 7, 8, 16}) {
    Tape tape;
    REState s = re.forward(tape, input(tape, m));
    const std::size_t half = (m + 1) / 2;
    EXPECT_EQ(s.n_feat.shape(), (Shape{half, 6}));
    EXPECT_EQ(s.k_feat.shape(), (Shape{half, 6}));
    EXPECT_EQ(s.fused.shape(), (Shape{half, 6}));
    EXPECT_EQ(s.fusion_weights.shape(), (Shape{half, 2}));
    EXPECT_EQ(s.seed_coords.shape(), (Shape{half, 3}));
  }
}

TEST_F(ReFixture, OddSeedCountEqualsExplicitPadding) {
  Tape tape;
  FeatureMap h = input(tape, 7);
  Var via_class = re.resolution_block(tape, h.feats);
  Var via_free = resolution_block(tape, pad_rows_to_even(h.feats), re.resolution_mlp());
  EXPECT_TRUE(via_class.value().bit_equal(via_free.value()));
}

TEST_F(ReFixture, GateWeightsFormConvexPair) {
  for (int rep = 0; rep < 20; ++rep) {
    Tape tape;
    REState s = re.forward(tape, input(tape, 12));
    const auto w = s.fusion_weights.value().to_vector();
    const auto k = s.k_feat.value().to_vector();
    const auto n = s.n_feat.value().to_vector();
    const auto fused = s.fused.value().to_vector();
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(w[2 * i] + w[2 * i + 1], 1.0, 1e-12);
      EXPECT_GE(w[2 * i], 0);
      EXPECT_GE(w[2 * i + 1], 0);
      for (std::size_t c = 0; c < 6; ++c) {
        const std::size_t at = i * 6 + c;
        EXPECT_GE(fused[at], std::min(k[at], n[at]) - 1e-12);
        EXPECT_LE(fused[at], std::max(k[at], n[at]) + 1e-12);
        EXPECT_NEAR(fused[at], w[2 * i] * k[at] + w[2 * i + 1] * n[at], 1e-12);
      }
    }
  }
}

TEST_F(ReFixture, ZeroGateAveragesBranches) {
  zero_mlp(re.gamma());
  Tape tape;
  REState s = re.forward(tape, input(tape, 10));
  const auto k = s.k_feat.value().to_vector();
  const auto n = s.n_feat.value().to_vector();
  std::vector<double> half(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) half[i] = 0.5 * (k[i] + n[i]);
  expect_near(s.fused.value(), half, 1e-15);
  for (double w : s.fusion_weights.value().to_vector()) EXPECT_EQ(w, 0.5);
}

TEST_F(ReFixture, EqualBranchesPassThrough) {
  Tape tape;
  Var k = tape.constant(randn({5, 6}, rng));
  auto [fused, weights] = re.fuse(tape, k, k);
  expect_near(fused.value(), k.value(), 1e-12);
}

TEST_F(ReFixture, FuseRejectsMismatchedBranches) {
  Tape tape;
  Var a = tape.constant(randn({5, 6}, rng));
  Var b = tape.constant(randn({4, 6}, rng));
  EXPECT_THROW(re.fuse(tape, a, b), DimensionError);
}

TEST_F(ReFixture, TranslationDoesNotChangeOutput) {
  for (int rep = 0; rep < 5; ++rep) {
    Tape tape;
    REState base = re.forward(tape, input(tape, 14));
    const double shift[] = {3.25, -1.5, 0.75};
    Tensor moved = coords;
    auto mv = moved.mutable_data<double>();
    for (std::size_t i = 0; i < mv.size(); ++i) mv[i] += shift[i % 3];
    REState s = re.forward(tape, FeatureMap{moved, tape.constant(feats), 0});
    expect_near(s.fused.value(), base.fused.value(), 1e-9);
  }
}

TEST_F(ReFixture, FeatureBlockMatchesBruteForceRecomposition) {
  Tape tape;
  FeatureMap h = input(tape, 11);
  const Tensor got = re.feature_block(tape, h, re.grouping_for(h.seed_coords)).value();
  const auto c = coords.to_vector(), f = feats.to_vector();
  const REConfig& cfg = re.config();
  for (std::size_t j = 0; j < 6; ++j) {
    std::vector<std::size_t> nb;
    for (std::size_t i = 0; i < 11 && nb.size() < cfg.k; ++i) {
      double d2 = 0;
      for (int a = 0; a < 3; ++a) d2 += std::pow(c[i * 3 + a] - c[j * 3 + a], 2);
      if (d2 <= cfg.radius * cfg.radius) nb.push_back(i);
    }
    while (nb.size() < cfg.k) nb.push_back(nb.front());
    std::vector<double> rows;
    for (std::size_t i : nb) {
      rows.insert(rows.end(), f.begin() + i * 4, f.begin() + i * 4 + 4);
      for (int a = 0; a < 3; ++a) rows.push_back(c[i * 3 + a] - c[j * 3 + a]);
    }
    const auto out = naive_mlp(re.feature_mlp(), rows, cfg.k);
    for (std::size_t ch = 0; ch < 6; ++ch) {
      double best = -INFINITY;
      for (std::size_t r = 0; r < cfg.k; ++r) best = std::max(best, out[r * 6 + ch]);
      EXPECT_NEAR(got.to_vector()[j * 6 + ch], best, 1e-12);
    }
  }
}

TEST(REConfig, ValidateRejectsInconsistentWidths) {
  REConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.resolution_mlp = {5};
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = small_config();
  cfg.feature_mlp.clear();
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = small_config();
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
}

}  // namespace
}  // namespace pst2
