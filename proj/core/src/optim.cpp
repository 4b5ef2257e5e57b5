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

#include "pst2/optim.h"

#include <cmath>

#include "pst2/errors.h"

namespace pst2 {

void adam_step(std::span<Param* const> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.emplace_back(p->value.shape(), p->value.dtype());
      state.v.emplace_back(p->value.shape(), p->value.dtype());
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.m[i].shape() != p.value.shape()) {
      throw DimensionError("adam_step: shape mismatch for '" + p.name + "'");
    }
    if (p.trainable && !p.grad.all_finite()) {
      throw NumericError("adam_step: non-finite gradient for '" + p.name + "' at step " +
                         std::to_string(state.t + 1));
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.trainable) continue;
    visit_dtype(p.value.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto w = p.value.mutable_data<T>();
      auto g = p.grad.data<T>();
      auto m = state.m[i].mutable_data<T>();
      auto v = state.v[i].mutable_data<T>();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j];
        const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
        const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double step = state.lr * (mj / c1) / (std::sqrt(vj / c2) + state.eps);
        w[j] = static_cast<T>(w[j] - step);
      }
    });
  }
}

}  // namespace pst2
