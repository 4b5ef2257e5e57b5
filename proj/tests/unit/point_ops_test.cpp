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
#include <random>

#include "pst2/errors.h"
#include "pst2/point_ops.h"
#include "test_util.h"

namespace pst2 {
namespace {

using testing::expect_near;
using testing::randn;

Tensor points(std::initializer_list<double> xyz) {
  return Tensor::from_values({xyz.size() / 3, 3}, xyz, DType::kFloat64);
}

double sq(const Point3& a, const Point3& b) {
  double s = 0;
  for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

// Greedy max-min selection recomputed from scratch at every step. A point is never picked twice.
std::vector<std::int64_t> greedy_oracle(const std::vector<Point3>& pts, std::size_t m, std::size_t start) {
  std::vector<std::int64_t> chosen{static_cast<std::int64_t>(start)};
  while (chosen.size() < m) {
    double best = -1;
    std::int64_t arg = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), static_cast<std::int64_t>(i)) != chosen.end()) continue;
      double nearest = INFINITY;
      for (auto c : chosen) nearest = std::min(nearest, sq(pts[i], pts[static_cast<std::size_t>(c)]));
      if (nearest > best) {
        best = nearest;
        arg = static_cast<std::int64_t>(i);
      }
    }
    chosen.push_back(arg);
  }
  return chosen;
}

TEST(Fps, SingleSeedIsStart) {
  Tensor c = points({0, 0, 0, 1, 0, 0, 2, 0, 0});
  EXPECT_EQ(fps(c, 1, 2).indices, (std::vector<std::int64_t>{2}));
}

TEST(Fps, CollinearPicksFarEnd) {
  Tensor c = points({0, 0, 0, 1, 0, 0, 10, 0, 0});
  EXPECT_EQ(fps(c, 2, 0).indices, (std::vector<std::int64_t>{0, 2}));
}

TEST(Fps, AllPointsWhenMEqualsN) {
  std::mt19937_64 rng(1);
  Tensor c = randn({9, 3}, rng);
  auto idx = fps(c, 9).indices;
  std::sort(idx.begin(), idx.end());
  std::vector<std::int64_t> all(9);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(idx, all);
}

TEST(Fps, RejectsBadArguments) {
  Tensor c = points({0, 0, 0, 1, 0, 0});
  EXPECT_THROW(fps(c, 3), ContractError);
  EXPECT_THROW(fps(c, 0), ContractError);
  EXPECT_THROW(fps(c, 1, 2), ContractError);
}

TEST(Fps, MatchesExhaustiveGreedyOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng() % 64;
    const std::size_t m = 1 + rng() % n;
    const std::size_t start = rng() % n;
    // Every fourth instance lives on a coarse integer grid to force ties.
    Tensor c = rep % 4 == 0 ? Tensor::uniform({n, 3}, 0, 3, DType::kFloat64, rng) : randn({n, 3}, rng);
    if (rep % 4 == 0) {
      for (auto& v : c.mutable_data<double>()) v = std::floor(v);
    }
    const SeedSet s = fps(c, m, start);
    EXPECT_EQ(s.indices, greedy_oracle(to_points(c), m, start)) << "instance " << rep;
    std::vector<std::int64_t> sorted = s.indices;
    std::sort(sorted.begin(), sorted.end());
    if (rep % 4 != 0) {
      EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    }
  }
}

TEST(Fps, SeedCoordsAreTheChosenPoints) {
  std::mt19937_64 rng(3);
  Tensor c = randn({20, 3}, rng);
  const SeedSet s = fps(c, 5);
  const auto pts = to_points(c);
  const auto seeds = to_points(s.coords);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(seeds[i], pts[static_cast<std::size_t>(s.indices[i])]);
}

TEST(BallQuery, LargeRadiusTakesEveryPoint) {
  std::mt19937_64 rng(4);
  Tensor c = randn({7, 3}, rng);
  const auto g = ball_query(fps(c, 3), c, 100.0, 10);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto nb = g.neighbors(s);
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(nb[j], static_cast<std::int64_t>(j));
    for (std::size_t j = 7; j < 10; ++j) EXPECT_EQ(nb[j], 0);  // padded with the first found
  }
}

TEST(BallQuery, GridCornerSeesAxisNeighbors) {
  std::vector<Point3> grid;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) grid.push_back({double(x), double(y), 0});
  Tensor c = from_points(grid, DType::kFloat64);
  const std::int64_t corner[] = {0};
  const auto g = ball_query(subset(fps(c, 1, 0), corner), c, 1.1, 8);
  std::vector<std::int64_t> nb(g.neighbors(0).begin(), g.neighbors(0).end());
  std::sort(nb.begin(), nb.end());
  nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  EXPECT_EQ(nb, (std::vector<std::int64_t>{0, 1, 3}));
}

TEST(BallQuery, IsolatedSeedRepeatsItself) {
  Tensor c = points({0, 0, 0, 0.1, 0, 0, 50, 50, 50});
  SeedSet s;
  s.indices = {2};
  s.coords = points({50, 50, 50});
  const auto g = ball_query(s, c, 1.0, 4);
  for (auto i : g.neighbors(0)) EXPECT_EQ(i, 2);
}

TEST(BallQuery, NeighborsInRadiusAndMatchBruteForce) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 10 + rng() % 50, k = 1 + rng() % 10;
    const double radius = std::uniform_real_distribution<double>(0.2, 1.5)(rng);
    Tensor c = Tensor::uniform({n, 3}, 0, 2, DType::kFloat64, rng);
    const SeedSet seeds = fps(c, 1 + rng() % 8);
    const auto g = ball_query(seeds, c, radius, k);
    const auto pts = to_points(c);
    const auto centers = to_points(seeds.coords);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      std::vector<std::int64_t> want;
      for (std::size_t i = 0; i < n && want.size() < k; ++i) {
        if (sq(pts[i], centers[s]) <= radius * radius) want.push_back(static_cast<std::int64_t>(i));
      }
      ASSERT_FALSE(want.empty());
      const std::int64_t first = want.front();
      while (want.size() < k) want.push_back(first);
      const auto nb = g.neighbors(s);
      EXPECT_EQ(std::vector<std::int64_t>(nb.begin(), nb.end()), want);
      for (auto i : nb) EXPECT_LE(std::sqrt(sq(pts[static_cast<std::size_t>(i)], centers[s])), radius + 1e-12);
    }
  }
}

TEST(SetAbstraction, SingleNeighborIdentityMlpReturnsFeatAndOffset) {
  Tensor c = points({0, 0, 0, 1, 2, 3});
  Tensor f = Tensor::from_values({2, 2}, {7, 8, 9, 10});
  NeighborhoodGrouping g;
  g.seeds.indices = {0};
  g.seeds.coords = points({0.5, 0.5, 0.5});
  g.neighbor_idx = {1};
  g.k = 1;
  g.radius = 10;
  Mlp id = Mlp::identity("id", 5, DType::kFloat64);
  Tape tape;
  Var out = set_abstraction(tape, tape.constant(f), c, g, id);
  expect_near(out.value(), {9, 10, 0.5, 1.5, 2.5}, 1e-15);
}

TEST(SetAbstraction, TwoNeighborsKnownWeights) {
  Tensor c = points({0, 0, 0, 1, 0, 0, 0, 2, 0});
  Tensor f = Tensor::from_values({3, 1}, {1, -1, 3});
  NeighborhoodGrouping g;
  g.seeds.indices = {0};
  g.seeds.coords = points({0, 0, 0});
  g.neighbor_idx = {1, 2};
  g.k = 2;
  Linear l;
  l.weight = Param("w", Tensor::from_values({4, 2}, {1, 0, 0, 1, 2, 0, 0, -1}));
  l.bias = Param("b", Tensor::from_values({2}, {0.5, 0}));
  l.act = Activation::kNone;
  Mlp mlp(std::vector<Linear>{l});
  Tape tape;
  // Rows of x are [feat, dx, dy, dz].
  // Neighbor 1: [-1, 1, 0, 0] -> [-1 + .5, 1] = [-0.5, 1]
  // Neighbor 2: [ 3, 0, 2, 0] -> [3 + 2 * 2 + .5, 0] = [7.5, 0]
  Var out = set_abstraction(tape, tape.constant(f), c, g, mlp);
  expect_near(out.value(), {7.5, 1}, 1e-15);
}

class SetAbstractionSymmetry : public ::testing::Test {
 protected:
  void SetUp() override {
    rng.seed(6);
    coords = Tensor::uniform({30, 3}, 0, 1, DType::kFloat64, rng);
    feats = randn({30, 4}, rng);
    grouping = ball_query(fps(coords, 6), coords, 0.45, 8);
    const std::size_t widths[] = {16, 8};
    mlp = Mlp("sa", 7, widths, Activation::kRelu, DType::kFloat64, rng);
  }
  Tensor run(const Tensor& c, const Tensor& f, const NeighborhoodGrouping& g) {
    Tape tape;
    return set_abstraction(tape, tape.constant(f), c, g, mlp).value();
  }
  std::mt19937_64 rng;
  Tensor coords, feats;
  NeighborhoodGrouping grouping;
  Mlp mlp;
};

TEST_F(SetAbstractionSymmetry, NeighborOrderDoesNotMatter) {
  const Tensor base = run(coords, feats, grouping);
  for (int rep = 0; rep < 10; ++rep) {
    NeighborhoodGrouping shuffled = grouping;
    for (std::size_t s = 0; s < shuffled.num_seeds(); ++s) {
      auto b = shuffled.neighbor_idx.begin() + static_cast<long>(s * shuffled.k);
      std::shuffle(b, b + static_cast<long>(shuffled.k), rng);
    }
    EXPECT_TRUE(run(coords, feats, shuffled).bit_equal(base));
  }
}

TEST_F(SetAbstractionSymmetry, PointOrderDoesNotMatter) {
  const Tensor base = run(coords, feats, grouping);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> where(30);
  for (std::size_t i = 0; i < 30; ++i) where[perm[i]] = i;
  const auto cv = coords.to_vector(), fv = feats.to_vector();
  std::vector<double> pc(cv.size()), pf(fv.size());
  for (std::size_t i = 0; i < 30; ++i) {
    std::copy_n(cv.begin() + perm[i] * 3, 3, pc.begin() + i * 3);
    std::copy_n(fv.begin() + perm[i] * 4, 4, pf.begin() + i * 4);
  }
  NeighborhoodGrouping moved = grouping;
  for (auto& i : moved.neighbor_idx) i = static_cast<std::int64_t>(where[static_cast<std::size_t>(i)]);
  EXPECT_TRUE(run(Tensor::from_values({30, 3}, pc), Tensor::from_values({30, 4}, pf), moved).bit_equal(base));
}

TEST_F(SetAbstractionSymmetry, WrongMlpWidthThrows) {
  const std::size_t widths[] = {4};
  Mlp narrow("n", 5, widths, Activation::kRelu, DType::kFloat64, rng);
  Tape tape;
  EXPECT_THROW(set_abstraction(tape, tape.constant(feats), coords, grouping, narrow), DimensionError);
}

TEST(Interpolate, CoincidentTargetCopiesSource) {
  Tensor src = points({0, 0, 0, 1, 0, 0, 0, 1, 0});
  Tensor tgt = points({1, 0, 0});
  Tape tape;
  Var f = tape.constant(Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6}));
  expect_near(interpolate_features(tgt, FeatureMap{src, f, 0}, 3).value(), {3, 4}, 1e-5);
}

TEST(Interpolate, MidpointAveragesTwoSources) {
  Tensor src = points({-1, 0, 0, 1, 0, 0});
  Tensor tgt = points({0, 0, 0});
  Tape tape;
  Var f = tape.constant(Tensor::from_values({2, 1}, {2, 6}));
  expect_near(interpolate_features(tgt, FeatureMap{src, f, 0}, 2).value(), {4}, 1e-12);
}

TEST(Interpolate, MatchesBruteForceKnnIdw) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t q = 1 + rng() % 20, s = 3 + rng() % 10, d = 1 + rng() % 5;
    Tensor tgt = randn({q, 3}, rng), src = randn({s, 3}, rng), f = randn({s, d}, rng);
    Tape tape;
    const auto got = interpolate_features(tgt, FeatureMap{src, tape.constant(f), 0}, 3).value().to_vector();
    const auto tp = to_points(tgt), sp = to_points(src);
    const auto fv = f.to_vector();
    for (std::size_t i = 0; i < q; ++i) {
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t j = 0; j < s; ++j) dist.push_back({std::sqrt(sq(tp[i], sp[j])), j});
      std::sort(dist.begin(), dist.end());
      double wsum = 0;
      std::vector<double> acc(d, 0.0);
      for (int n = 0; n < 3; ++n) {
        const double w = 1.0 / (dist[n].first + 1e-8);
        wsum += w;
        for (std::size_t c = 0; c < d; ++c) acc[c] += w * fv[dist[n].second * d + c];
      }
      for (std::size_t c = 0; c < d; ++c) {
        const double want = acc[c] / wsum;
        EXPECT_NEAR(got[i * d + c], want, 1e-6);
        double lo = INFINITY, hi = -INFINITY;
        for (int n = 0; n < 3; ++n) {
          lo = std::min(lo, fv[dist[n].second * d + c]);
          hi = std::max(hi, fv[dist[n].second * d + c]);
        }
        EXPECT_GE(got[i * d + c], lo - 1e-12);
        EXPECT_LE(got[i * d + c], hi + 1e-12);
      }
    }
  }
}

TEST(Interpolate, WeightsSumToOne) {
  std::mt19937_64 rng(8);
  Tensor tgt = randn({40, 3}, rng), src = randn({12, 3}, rng);
  const auto w = idw_weights(tgt, src, 3);
  for (std::size_t i = 0; i < 40; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < 3; ++j) total += w.weights[i * 3 + j];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(PointCloudFrame, ValidateCatchesBadLabels) {
  PointCloudFrame f;
  f.coords = points({0, 0, 0, 1, 1, 1});
  f.feats = Tensor::zeros({2, 1});
  f.labels = std::vector<std::int32_t>{0, 3};
  EXPECT_THROW(f.validate(3), ContractError);
  f.labels = std::vector<std::int32_t>{0, 2};
  EXPECT_NO_THROW(f.validate(3));
}

}  // namespace
}  // namespace pst2
