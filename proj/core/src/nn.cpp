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

#include "pst2/nn.h"

#include <cmath>

#include "pst2/errors.h"

namespace pst2 {

Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Activation act,
                   DType dtype, std::mt19937_64& rng) {
  if (in == 0 || out == 0) throw DimensionError("make_linear: zero-width layer " + name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = Param(name + ".weight", Tensor::uniform({in, out}, -bound, bound, dtype, rng));
  l.bias = Param(name + ".bias", Tensor::uniform({out}, -bound, bound, dtype, rng));
  l.act = act;
  return l;
}

Var mlp_forward(Tape& tape, const Var& x, std::span<Linear> layers) {
  const Shape in_shape = x.shape();
  if (in_shape.empty()) throw DimensionError("mlp_forward: input must have rank >= 1");
  const std::size_t rows = shape_numel(in_shape) / std::max<std::size_t>(in_shape.back(), 1);
  Var h = in_shape.size() == 2 ? x : reshape(x, {rows, in_shape.back()});
  for (Linear& l : layers) {
    if (l.weight.value.shape().at(0) != h.dim(-1)) {
      throw DimensionError("mlp_forward: layer " + l.weight.name + " expects width " +
                           std::to_string(l.weight.value.shape()[0]) + ", got " +
                           std::to_string(h.dim(-1)));
    }
    h = add(matmul(h, tape.param(l.weight)), tape.param(l.bias));
    if (l.act == Activation::kRelu) h = relu(h);
  }
  if (in_shape.size() == 2) return h;
  Shape out_shape = in_shape;
  out_shape.back() = h.dim(-1);
  return reshape(h, out_shape);
}

Mlp::Mlp(const std::string& name, std::size_t in_dim, std::span<const std::size_t> widths,
         Activation last, DType dtype, std::mt19937_64& rng) {
  std::size_t in = in_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Activation act = i + 1 == widths.size() ? last : Activation::kRelu;
    layers_.push_back(make_linear(name + "." + std::to_string(i), in, widths[i], act, dtype, rng));
    in = widths[i];
  }
}

Mlp::Mlp(std::vector<Linear> layers) : layers_(std::move(layers)) {}

Mlp Mlp::identity(const std::string& name, std::size_t dim, DType dtype) {
  Tensor w({dim, dim}, dtype);
  for (std::size_t i = 0; i < dim; ++i) w.set_item(i * dim + i, 1.0);
  Linear l;
  l.weight = Param(name + ".0.weight", w);
  l.bias = Param(name + ".0.bias", Tensor::zeros({dim}, dtype));
  return Mlp(std::vector<Linear>{std::move(l)});
}

Var Mlp::forward(Tape& tape, const Var& x) {
  if (layers_.empty()) return x;
  return mlp_forward(tape, x, layers_);
}

std::size_t Mlp::in_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.value.shape()[0];
}

std::size_t Mlp::out_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.value.shape()[1];
}

void Mlp::collect_params(std::vector<Param*>& out) {
  for (Linear& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

}  // namespace pst2
