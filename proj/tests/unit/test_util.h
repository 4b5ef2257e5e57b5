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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pst2/autodiff.h"
#include "pst2/nn.h"

namespace pst2::testing {

inline Tensor randn(Shape s, std::mt19937_64& rng, DType dtype = DType::kFloat64) {
  return Tensor::normal(std::move(s), 0.0, 1.0, dtype, rng);
}

inline void expect_near(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

inline void expect_near(const Tensor& got, const std::vector<double>& want, double tol) {
  expect_near(got.to_vector(), want, tol);
}

inline void expect_near(const Tensor& got, const Tensor& want, double tol) {
  ASSERT_EQ(got.shape(), want.shape());
  expect_near(got.to_vector(), want.to_vector(), tol);
}

// Plain triple-loop product of row-major [p,q] x [q,r].
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t p, std::size_t q, std::size_t r) {
  std::vector<double> c(p * r, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k)
      for (std::size_t j = 0; j < r; ++j) c[i * r + j] += a[i * q + k] * b[k * r + j];
  return c;
}

// Evaluates `mlp` on row-major [rows, in] input with naive loops.
inline std::vector<double> naive_mlp(const Mlp& mlp, std::vector<double> x, std::size_t rows) {
  for (const Linear& l : mlp.layers()) {
    const std::size_t in = l.weight.value.dim(0), out = l.weight.value.dim(1);
    x = naive_matmul(x, l.weight.value.to_vector(), rows, in, out);
    const auto b = l.bias.value.to_vector();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < out; ++j) {
        double& v = x[i * out + j];
        v += b[j];
        if (l.act == Activation::kRelu && v < 0) v = 0;
      }
  }
  return x;
}

}  // namespace pst2::testing
