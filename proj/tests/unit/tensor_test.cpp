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

#include <random>

#include "pst2/errors.h"
#include "pst2/tensor.h"

namespace pst2 {
namespace {

TEST(Tensor, ZerosHaveShapeAndCount) {
  Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.dim(-1), 4u);
  EXPECT_EQ(t.dtype(), DType::kFloat32);
  for (double v : t.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, FromValuesChecksCount) {
  EXPECT_THROW(Tensor::from_values({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(t.item(3), 4.0);
}

TEST(Tensor, AxisOutOfRangeThrows) {
  Tensor t = Tensor::zeros({2, 3});
  EXPECT_THROW(t.dim(2), DimensionError);
  EXPECT_THROW(t.dim(-3), DimensionError);
}

TEST(Tensor, CopiesBehaveAsValues) {
  Tensor a = Tensor::from_values({3}, {1, 2, 3});
  Tensor b = a;
  b.set_item(0, 10);
  EXPECT_EQ(a.item(0), 1.0);
  EXPECT_EQ(b.item(0), 10.0);
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = a.reshape({3, 2});
  EXPECT_EQ(b.to_vector(), a.to_vector());
  EXPECT_THROW(a.reshape({4, 2}), DimensionError);
}

TEST(Tensor, AstypeRoundTripsThroughDouble) {
  std::mt19937_64 rng(3);
  Tensor f = Tensor::normal({5, 4}, 0, 1, DType::kFloat32, rng);
  Tensor back = f.astype(DType::kFloat64).astype(DType::kFloat32);
  EXPECT_TRUE(back.bit_equal(f));
}

TEST(Tensor, BitEqualSeesDtypeAndShape) {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  EXPECT_TRUE(a.bit_equal(a.reshape({2, 2})));
  EXPECT_FALSE(a.bit_equal(a.reshape({4})));
  EXPECT_FALSE(a.bit_equal(a.astype(DType::kFloat32)));
}

TEST(Tensor, RandomDrawsFollowTheSeed) {
  std::mt19937_64 r1(11), r2(11);
  EXPECT_TRUE(Tensor::uniform({10}, -1, 1, DType::kFloat64, r1)
                  .bit_equal(Tensor::uniform({10}, -1, 1, DType::kFloat64, r2)));
}

TEST(Tensor, AllFiniteDetectsNanAndInf) {
  Tensor t = Tensor::from_values({2}, {1, 2});
  EXPECT_TRUE(t.all_finite());
  t.set_item(1, std::nan(""));
  EXPECT_FALSE(t.all_finite());
  t.set_item(1, INFINITY);
  EXPECT_FALSE(t.all_finite());
}

}  // namespace
}  // namespace pst2
