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
#include <span>
#include <vector>

#include "pst2/autodiff.h"

namespace pst2 {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments

  explicit AdamState(double learning_rate = 1e-3) : lr(learning_rate) {}
};

/// One bias-corrected Adam update of every trainable parameter from its
/// Param::grad. Moments are allocated on the first call. Throws
/// NumericError if any gradient is non-finite, before touching anything.
void adam_step(std::span<Param* const> params, AdamState& state);

}  // namespace pst2
