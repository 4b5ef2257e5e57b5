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
#include <set>

#include "pst2/errors.h"
#include "pst2/gradcheck.h"

namespace pst2 {
namespace {

// Elementwise square whose backward can be deliberately wrong.
Var square(Tape& tape, const Var& x, double grad_factor) {
  Tensor out = x.value();
  for (auto& v : out.mutable_data<double>()) v *= v;
  const std::size_t id = x.id();
  return tape.record(out, {id}, [id, grad_factor](const Tensor& g, Tape& t) {
    Tensor d = t.value(id);
    auto dv = d.mutable_data<double>();
    const auto gv = g.data<double>();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = grad_factor * dv[i] * gv[i];
    t.accumulate(id, d);
  });
}

FdProblem square_problem(double grad_factor, std::mt19937_64& rng) {
  FdProblem p;
  p.inputs.push_back(Tensor::normal({4, 3}, 0, 1, DType::kFloat64, rng));
  p.fn = [grad_factor](Tape& tape, std::span<const Var> in) { return square(tape, in[0], grad_factor); };
  return p;
}

TEST(FiniteDifference, AcceptsCorrectBackward) {
  std::mt19937_64 rng(61);
  FdProblem p = square_problem(2.0, rng);
  const FdResult r = finite_difference_check(p, rng);
  EXPECT_LT(r.rel_err, 1e-7);
  EXPECT_EQ(r.checked, 12u);
}

TEST(FiniteDifference, FlagsWrongBackward) {
  std::mt19937_64 rng(62);
  FdProblem p = square_problem(1.0, rng);
  EXPECT_GT(finite_difference_check(p, rng).rel_err, 0.1);
}

TEST(FiniteDifference, ChecksParameters) {
  std::mt19937_64 rng(63);
  auto w = std::make_shared<Param>("w", Tensor::normal({3, 2}, 0, 1, DType::kFloat64, rng));
  FdProblem p;
  p.inputs.push_back(Tensor::normal({5, 3}, 0, 1, DType::kFloat64, rng));
  p.params.push_back(w.get());
  p.owner = w;
  p.fn = [w](Tape& tape, std::span<const Var> in) { return matmul(in[0], tape.param(*w)); };
  const FdResult r = finite_difference_check(p, rng);
  EXPECT_LT(r.rel_err, 1e-7);
  EXPECT_EQ(r.checked, 15u + 6u);
}

TEST(FiniteDifference, RequiresDoublePrecision) {
  std::mt19937_64 rng(64);
  FdProblem p = square_problem(2.0, rng);
  p.inputs[0] = p.inputs[0].astype(DType::kFloat32);
  EXPECT_THROW(finite_difference_check(p, rng), ContractError);
}

TEST(Gradcheck, EveryModulePasses) {
  const GradcheckReport rep = run_gradcheck("all", 10);
  EXPECT_TRUE(rep.passed());
  EXPECT_LT(rep.max_error(), 1e-4);
  std::set<std::string> seen;
  for (const auto& c : rep.cases) {
    seen.insert(c.module);
    EXPECT_TRUE(c.passed) << c.module << "/" << c.name << " #" << c.instance << " err " << c.result.rel_err;
  }
  for (const auto& m : gradcheck_modules()) EXPECT_TRUE(seen.count(m)) << m;
  EXPECT_THROW(run_gradcheck("nope"), ContractError);
}

}  // namespace
}  // namespace pst2
