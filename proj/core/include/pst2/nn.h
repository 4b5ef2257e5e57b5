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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pst2/autodiff.h"

namespace pst2 {

enum class Activation { kNone, kRelu };

/// y = act(x W + b), W: [in, out], b: [out].
struct Linear {
  Param weight;
  Param bias;
  Activation act = Activation::kNone;
};

/// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Activation act,
                   DType dtype, std::mt19937_64& rng);

/// Applies `layers` pointwise over the last axis of `x`.
Var mlp_forward(Tape& tape, const Var& x, std::span<Linear> layers);

/// Shared pointwise multi-layer perceptron.
class Mlp {
 public:
  Mlp() = default;
  /// Hidden layers use ReLU; the last layer uses `last`.
  Mlp(const std::string& name, std::size_t in_dim, std::span<const std::size_t> widths,
      Activation last, DType dtype, std::mt19937_64& rng);
  explicit Mlp(std::vector<Linear> layers);

  /// Single linear layer with W = I and b = 0.
  static Mlp identity(const std::string& name, std::size_t dim, DType dtype);

  Var forward(Tape& tape, const Var& x);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  bool empty() const { return layers_.empty(); }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  void collect_params(std::vector<Param*>& out);

 private:
  std::vector<Linear> layers_;
};

}  // namespace pst2
