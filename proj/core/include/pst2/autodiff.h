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
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pst2/tensor.h"

namespace pst2 {

/// A learnable tensor together with its accumulated gradient.
struct Param {
  Param() = default;
  Param(std::string name, Tensor value);

  void zero_grad();

  std::string name;
  Tensor value;
  Tensor grad;  // same shape and dtype as value
  bool trainable = true;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(long axis) const { return value().dim(axis); }
  DType dtype() const { return value().dtype(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Wengert list for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the record is topologically
/// sorted by construction and backward() simply walks it in reverse. A tape
/// is owned by one thread for the duration of a forward/backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable input; read its gradient back with grad().
  Var leaf(Tensor value);
  /// Leaf bound to `param`. Repeated calls for the same Param return the
  /// same node.
  Var param(Param& param);

  /// Appends an op node. `fn` receives the upstream gradient and must call
  /// accumulate() for each input that needs_grad().
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  /// Reverse sweep from a scalar loss. Node gradients are summed over every
  /// use of the node.
  void backward(const Var& loss);

  /// Gradient of the last backward() with respect to `v` (zeros when `v`
  /// was not reached).
  Tensor grad(const Var& v) const;

  /// Adds the gradients of every bound Param into Param::grad.
  void accumulate_param_grads() const;
  /// (param, gradient) pairs in binding order; unreached params get zeros.
  std::vector<std::pair<Param*, Tensor>> param_grads() const;

  void accumulate(std::size_t id, const Tensor& grad);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Param* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;  // element addresses stay valid on push_back
  std::vector<Tensor> grads_;
  std::vector<std::size_t> param_order_;
  std::unordered_map<const Param*, std::size_t> param_nodes_;
};

/// Zeroes the grads of `params`, runs the reverse sweep from `loss`, and
/// accumulates into each Param reached through the loss' tape. Throws
/// ContractError unless `loss` holds exactly one element.
void backward(const Var& loss, std::span<Param* const> params);

// ---------------------------------------------------------------------------
// Differentiable operations. All operands must live on the same tape and share
// a dtype. Every op checks its output for NaN/Inf and throws NumericError.

/// Elementwise with numpy-style broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var scale(const Var& x, double c);
/// x / c, computed as a true division.
Var divide(const Var& x, double c);
Var relu(const Var& x);

/// Batched matrix product [.., p, q] x [.., q, r]; leading dims broadcast.
Var matmul(const Var& a, const Var& b);
Var transpose_last2(const Var& x);
Var reshape(const Var& x, Shape shape);

Var concat(std::span<const Var> parts, long axis);
Var slice(const Var& x, long axis, std::size_t begin, std::size_t end);
std::vector<Var> split(const Var& x, long axis, std::span<const std::size_t> sizes);

/// Max along `axis`; the gradient goes to the first maximal element.
Var max_over_axis(const Var& x, long axis);
Var mean_over_axis(const Var& x, long axis);
Var sum(const Var& x);
Var mean(const Var& x);

/// Softmax along the last axis with per-row max subtraction.
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// Rows x[idx[i]] along the first axis.
Var gather_rows(const Var& x, std::span<const std::int64_t> idx);
/// out[i] = sum_j weights[i*p+j] * x[idx[i*p+j]] over the first axis.
Var weighted_gather(const Var& x, std::span<const std::int64_t> idx,
                    std::span<const double> weights, std::size_t p);

/// Mean negative log-softmax of the true class over rows whose label is not
/// `ignore_label`. logits: [R, C].
Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels,
                  std::optional<std::int32_t> ignore_label = std::nullopt);

}  // namespace pst2
