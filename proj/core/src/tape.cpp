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

#include <algorithm>

#include "pst2/autodiff.h"
#include "pst2/errors.h"

namespace pst2 {

Param::Param(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape(), value.dtype())) {}

void Param::zero_grad() { grad = Tensor::zeros(value.shape(), value.dtype()); }

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("Var: uninitialized handle");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Param& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  param_order_.push_back(v.id());
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op at tape position " +
                       std::to_string(nodes_.size()));
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  if (g.shape() != nodes_[id].value.shape()) {
    throw DimensionError("gradient shape " + shape_to_string(g.shape()) +
                         " does not match node shape " +
                         shape_to_string(nodes_[id].value.shape()));
  }
  Tensor& slot = grads_[id];
  if (!slot.defined()) {
    slot = g;
    return;
  }
  visit_dtype(g.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto dst = slot.mutable_data<T>();
    auto src = g.data<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_to_string(lv.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  grads_[loss.id()] = Tensor::full(lv.shape(), 1.0, lv.dtype());
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || !grads_[i].defined()) continue;
    const Tensor g = grads_[i];
    n.backward(g, *this);
  }
}

Tensor Tape::grad(const Var& v) const {
  if (v.id() < grads_.size() && grads_[v.id()].defined()) return grads_[v.id()];
  const Tensor& val = nodes_[v.id()].value;
  return Tensor::zeros(val.shape(), val.dtype());
}

std::vector<std::pair<Param*, Tensor>> Tape::param_grads() const {
  std::vector<std::pair<Param*, Tensor>> out;
  out.reserve(param_order_.size());
  for (std::size_t id : param_order_) {
    out.emplace_back(nodes_[id].param, grad(Var(const_cast<Tape*>(this), id)));
  }
  return out;
}

void Tape::accumulate_param_grads() const {
  for (auto& [p, g] : param_grads()) {
    if (!p->trainable) continue;
    if (!p->grad.defined() || p->grad.shape() != p->value.shape()) p->zero_grad();
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto dst = p->grad.template mutable_data<T>();
      auto src = g.template data<T>();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    });
  }
}

void backward(const Var& loss, std::span<Param* const> params) {
  if (!loss.valid()) throw ContractError("backward: invalid loss handle");
  if (loss.value().numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_to_string(loss.shape()));
  }
  for (Param* p : params) p->zero_grad();
  loss.tape()->backward(loss);
  loss.tape()->accumulate_param_grads();
}

}  // namespace pst2
