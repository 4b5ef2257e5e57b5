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
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pst2/autodiff.h"

namespace pst2 {

/// A scalar-free function of some input tensors and parameters to check.
struct FdProblem {
  std::vector<Tensor> inputs;  // differentiated leaves
  std::vector<Param*> params;  // differentiated parameters
  std::function<Var(Tape&, std::span<const Var>)> fn;
  std::shared_ptr<void> owner;  // keeps modules behind `params` alive
};

struct FdResult {
  double rel_err = 0;   // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::size_t checked = 0;  // coordinates compared
};

/// Central differences on L = sum(R * fn(...)) with a fixed random R, so
/// every output element contributes with its own weight. At most
/// `max_coords` coordinates per tensor are perturbed (chosen at random).
FdResult finite_difference_check(FdProblem& problem, std::mt19937_64& rng,
                                 std::size_t max_coords = 32, double h = 1e-6);

struct GradcheckCase {
  std::string module;
  std::string name;
  std::size_t instance = 0;
  FdResult result;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double tolerance = 1e-4;

  bool passed() const;
  double max_error() const;
};

/// "tensor", "point-ops", "re", "stsa", "seg", "cls".
std::vector<std::string> gradcheck_modules();

/// Runs every check of `module` ("all" for every module) on `instances`
/// random float64 instances each.
GradcheckReport run_gradcheck(const std::string& module, std::size_t instances = 10,
                              double tolerance = 1e-4, std::uint64_t seed = 2024);

}  // namespace pst2
