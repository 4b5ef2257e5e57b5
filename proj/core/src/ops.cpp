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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pst2/autodiff.h"
#include "pst2/errors.h"

namespace pst2 {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  if (!a.valid() || !b.valid()) throw ContractError(std::string(op) + ": invalid operand");
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
  if (a.dtype() != b.dtype()) {
    throw DimensionError(std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) +
                         " vs " + dtype_name(b.dtype()));
  }
  return *a.tape();
}

Tape& tape_of(const Var& x, const char* op) {
  if (!x.valid()) throw ContractError(std::string(op) + ": invalid operand");
  return *x.tape();
}

// Strides of each operand expressed over the broadcast output index space.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
};

std::vector<std::size_t> contiguous_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  BroadcastPlan p;
  p.out.assign(r, 1);
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  const auto sa = contiguous_strides(a);
  const auto sb = contiguous_strides(b);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t oa = r - a.size();
    const std::size_t ob = r - b.size();
    const std::size_t da = i >= oa ? a[i - oa] : 1;
    const std::size_t db = i >= ob ? b[i - ob] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_to_string(a) +
                           " with " + shape_to_string(b));
    }
    p.out[i] = std::max(da, db);
    if (i >= oa && da != 1) p.stride_a[i] = sa[i - oa];
    if (i >= ob && db != 1) p.stride_b[i] = sb[i - ob];
  }
  return p;
}

template <class Fn>
void for_each_broadcast(const BroadcastPlan& p, Fn&& fn) {
  const std::size_t n = shape_numel(p.out);
  const std::size_t r = p.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    fn(o, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.stride_a[d] * p.out[d];
      ib -= p.stride_b[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryKind { kAdd, kSub, kMul };

Var binary(const Var& a, const Var& b, BinaryKind kind, const char* name) {
  Tape& tape = same_tape(a, b, name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  BroadcastPlan plan = plan_broadcast(av.shape(), bv.shape(), name);
  Tensor out(plan.out, av.dtype());
  visit_dtype(av.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = av.data<T>();
    auto y = bv.data<T>();
    auto z = out.mutable_data<T>();
    auto apply = [kind](T u, T v) {
      switch (kind) {
        case BinaryKind::kAdd: return u + v;
        case BinaryKind::kSub: return u - v;
        default: return u * v;
      }
    };
    if (av.shape() == bv.shape()) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = apply(x[i], y[i]);
    } else if (av.shape() == plan.out && !y.empty() && z.size() % y.size() == 0 &&
               std::equal(bv.shape().rbegin(), bv.shape().rend(), plan.out.rbegin())) {
      const std::size_t nb = y.size();
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = apply(x[i], y[i % nb]);
    } else {
      for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
        z[o] = apply(x[ia], y[ib]);
      });
    }
  });
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  return tape.record(
      std::move(out), {ida, idb},
      [ida, idb, kind, plan = std::move(plan)](const Tensor& g, Tape& t) {
        const Tensor& av = t.value(ida);
        const Tensor& bv = t.value(idb);
        const bool need_a = t.needs_grad(ida);
        const bool need_b = t.needs_grad(idb);
        Tensor ga = Tensor::zeros(av.shape(), av.dtype());
        Tensor gb = Tensor::zeros(bv.shape(), bv.dtype());
        visit_dtype(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto go = g.data<T>();
          auto x = av.data<T>();
          auto y = bv.data<T>();
          auto dx = ga.mutable_data<T>();
          auto dy = gb.mutable_data<T>();
          for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            switch (kind) {
              case BinaryKind::kAdd:
                if (need_a) dx[ia] += go[o];
                if (need_b) dy[ib] += go[o];
                break;
              case BinaryKind::kSub:
                if (need_a) dx[ia] += go[o];
                if (need_b) dy[ib] -= go[o];
                break;
              case BinaryKind::kMul:
                if (need_a) dx[ia] += go[o] * y[ib];
                if (need_b) dy[ib] += go[o] * x[ia];
                break;
            }
          });
        });
        if (need_a) t.accumulate(ida, ga);
        if (need_b) t.accumulate(idb, gb);
      });
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Var scale(const Var& x, double c) {
  Tape& tape = tape_of(x, "scale");
  Tensor out(x.shape(), x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    const T k = static_cast<T>(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] * k;
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id}, [id, c](const Tensor& g, Tape& t) {
    Tensor gx(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = g.data<T>();
      auto dst = gx.mutable_data<T>();
      const T k = static_cast<T>(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] * k;
    });
    t.accumulate(id, gx);
  });
}

Var divide(const Var& x, double c) {
  Tape& tape = tape_of(x, "divide");
  if (c == 0.0) throw NumericError("divide: division by zero");
  Tensor out(x.shape(), x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    const T k = static_cast<T>(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] / k;
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id}, [id, c](const Tensor& g, Tape& t) {
    Tensor gx(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = g.data<T>();
      auto dst = gx.mutable_data<T>();
      const T k = static_cast<T>(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] / k;
    });
    t.accumulate(id, gx);
  });
}

Var relu(const Var& x) {
  Tape& tape = tape_of(x, "relu");
  Tensor out(x.shape(), x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id}, [id](const Tensor& g, Tape& t) {
    Tensor gx(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto xin = t.value(id).data<T>();
      auto src = g.data<T>();
      auto dst = gx.mutable_data<T>();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = xin[i] > T(0) ? src[i] : T(0);
    });
    t.accumulate(id, gx);
  });
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw DimensionError("matmul: operands must have rank >= 2, got " + shape_to_string(sa) +
                         " and " + shape_to_string(sb));
  }
  const std::size_t p = sa[sa.size() - 2];
  const std::size_t q = sa.back();
  const std::size_t r = sb.back();
  if (sb[sb.size() - 2] != q) {
    throw DimensionError("matmul: inner dimensions differ in " + shape_to_string(sa) + " x " +
                         shape_to_string(sb));
  }
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  BroadcastPlan plan = plan_broadcast(batch_a, batch_b, "matmul");
  Shape out_shape = plan.out;
  out_shape.push_back(p);
  out_shape.push_back(r);
  Tensor out(out_shape, a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = a.value().data<T>();
    auto y = b.value().data<T>();
    auto z = out.mutable_data<T>();
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      ConstMatMap<T> am(x.data() + ia * p * q, p, q);
      ConstMatMap<T> bm(y.data() + ib * q * r, q, r);
      MatMap<T> cm(z.data() + o * p * r, p, r);
      cm.noalias() = am * bm;
    });
  });
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  return tape.record(
      std::move(out), {ida, idb},
      [ida, idb, p, q, r, plan = std::move(plan)](const Tensor& g, Tape& t) {
        const Tensor& av = t.value(ida);
        const Tensor& bv = t.value(idb);
        const bool need_a = t.needs_grad(ida);
        const bool need_b = t.needs_grad(idb);
        Tensor ga = Tensor::zeros(av.shape(), av.dtype());
        Tensor gb = Tensor::zeros(bv.shape(), bv.dtype());
        visit_dtype(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto go = g.data<T>();
          auto x = av.data<T>();
          auto y = bv.data<T>();
          auto dx = ga.mutable_data<T>();
          auto dy = gb.mutable_data<T>();
          for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            ConstMatMap<T> gm(go.data() + o * p * r, p, r);
            if (need_a) {
              ConstMatMap<T> bm(y.data() + ib * q * r, q, r);
              MatMap<T> dam(dx.data() + ia * p * q, p, q);
              dam.noalias() += gm * bm.transpose();
            }
            if (need_b) {
              ConstMatMap<T> am(x.data() + ia * p * q, p, q);
              MatMap<T> dbm(dy.data() + ib * q * r, q, r);
              dbm.noalias() += am.transpose() * gm;
            }
          });
        });
        if (need_a) t.accumulate(ida, ga);
        if (need_b) t.accumulate(idb, gb);
      });
}

Var transpose_last2(const Var& x) {
  Tape& tape = tape_of(x, "transpose_last2");
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("transpose_last2: rank must be >= 2");
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s.back();
  const std::size_t batch = shape_numel(s) / std::max<std::size_t>(rows * cols, 1);
  Shape os = s;
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  auto transpose = [rows, cols, batch](const Tensor& in, const Shape& out_shape, bool back) {
    Tensor out(out_shape, in.dtype());
    const std::size_t r = back ? cols : rows;
    const std::size_t c = back ? rows : cols;
    visit_dtype(in.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = in.data<T>();
      auto dst = out.mutable_data<T>();
      for (std::size_t bidx = 0; bidx < batch; ++bidx) {
        const std::size_t off = bidx * r * c;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) dst[off + j * r + i] = src[off + i * c + j];
      }
    });
    return out;
  };
  const std::size_t id = x.id();
  return tape.record(transpose(x.value(), os, false), {id},
                     [id, transpose, s](const Tensor& g, Tape& t) {
                       t.accumulate(id, transpose(g, s, true));
                     });
}

Var reshape(const Var& x, Shape shape) {
  Tape& tape = tape_of(x, "reshape");
  Tensor out = x.value().reshape(std::move(shape));
  const std::size_t id = x.id();
  Shape orig = x.shape();
  return tape.record(std::move(out), {id}, [id, orig](const Tensor& g, Tape& t) {
    t.accumulate(id, g.reshape(orig));
  });
}

Var concat(std::span<const Var> parts, long axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  Tape& tape = tape_of(parts[0], "concat");
  const Shape& s0 = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, s0.size());
  Shape os = s0;
  os[ax] = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> chunk;  // per-part contiguous chunk per outer index
  for (const Var& v : parts) {
    same_tape(parts[0], v, "concat");
    const Shape& s = v.shape();
    if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != ax && s[i] != s0[i]) {
        throw DimensionError("concat: shapes " + shape_to_string(s0) + " and " +
                             shape_to_string(s) + " differ off axis " + std::to_string(ax));
      }
    }
    os[ax] += s[ax];
    ids.push_back(v.id());
    chunk.push_back(split_at(s, ax).len * split_at(s, ax).inner);
  }
  const std::size_t outer = split_at(s0, ax).outer;
  const std::size_t row = std::accumulate(chunk.begin(), chunk.end(), std::size_t{0});
  Tensor out(os, parts[0].dtype());
  visit_dtype(parts[0].dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto dst = out.mutable_data<T>();
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto src = parts[k].value().data<T>();
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src.data() + o * chunk[k], chunk[k], dst.data() + o * row + col);
      }
      col += chunk[k];
    }
  });
  return tape.record(std::move(out), ids, [ids, chunk, outer, row](const Tensor& g, Tape& t) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = g.data<T>();
      std::size_t col = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (t.needs_grad(ids[k])) {
          Tensor gk(t.value(ids[k]).shape(), g.dtype());
          auto dst = gk.mutable_data<T>();
          for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(src.data() + o * row + col, chunk[k], dst.data() + o * chunk[k]);
          }
          t.accumulate(ids[k], gk);
        }
        col += chunk[k];
      }
    });
  });
}

Var slice(const Var& x, long axis, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(x, "slice");
  const Shape& s = x.shape();
  const std::size_t ax = normalize_axis(axis, s.size());
  if (begin > end || end > s[ax]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of size " + std::to_string(s[ax]));
  }
  const AxisSplit sp = split_at(s, ax);
  Shape os = s;
  os[ax] = end - begin;
  Tensor out(os, x.dtype());
  const std::size_t width = (end - begin) * sp.inner;
  const std::size_t row = sp.len * sp.inner;
  const std::size_t off = begin * sp.inner;
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(src.data() + o * row + off, width, dst.data() + o * width);
    }
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id},
                     [id, s, sp, width, row, off](const Tensor& g, Tape& t) {
                       Tensor gx(s, g.dtype());
                       visit_dtype(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         auto src = g.data<T>();
                         auto dst = gx.mutable_data<T>();
                         for (std::size_t o = 0; o < sp.outer; ++o) {
                           std::copy_n(src.data() + o * width, width,
                                       dst.data() + o * row + off);
                         }
                       });
                       t.accumulate(id, gx);
                     });
}

std::vector<Var> split(const Var& x, long axis, std::span<const std::size_t> sizes) {
  const std::size_t ax = normalize_axis(axis, x.shape().size());
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != x.shape()[ax]) {
    throw DimensionError("split: sizes sum to " + std::to_string(total) + " but axis has " +
                         std::to_string(x.shape()[ax]));
  }
  std::vector<Var> out;
  std::size_t begin = 0;
  for (std::size_t sz : sizes) {
    out.push_back(slice(x, static_cast<long>(ax), begin, begin + sz));
    begin += sz;
  }
  return out;
}

Var max_over_axis(const Var& x, long axis) {
  Tape& tape = tape_of(x, "max_over_axis");
  const Shape& s = x.shape();
  const std::size_t ax = normalize_axis(axis, s.size());
  const AxisSplit sp = split_at(s, ax);
  if (sp.len == 0) throw DimensionError("max_over_axis: empty axis");
  Shape os = s;
  os.erase(os.begin() + static_cast<long>(ax));
  Tensor out(os, x.dtype());
  std::vector<std::uint32_t> arg(sp.outer * sp.inner, 0);
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const T* base = src.data() + o * sp.len * sp.inner;
      T* best = dst.data() + o * sp.inner;
      std::uint32_t* who = arg.data() + o * sp.inner;
      std::copy_n(base, sp.inner, best);
      for (std::size_t j = 1; j < sp.len; ++j) {
        const T* rowp = base + j * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) {
          if (rowp[i] > best[i]) {
            best[i] = rowp[i];
            who[i] = static_cast<std::uint32_t>(j);
          }
        }
      }
    }
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id},
                     [id, s, sp, arg = std::move(arg)](const Tensor& g, Tape& t) {
                       Tensor gx(s, g.dtype());
                       visit_dtype(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         auto src = g.data<T>();
                         auto dst = gx.mutable_data<T>();
                         for (std::size_t o = 0; o < sp.outer; ++o) {
                           for (std::size_t i = 0; i < sp.inner; ++i) {
                             const std::size_t k = o * sp.inner + i;
                             dst[(o * sp.len + arg[k]) * sp.inner + i] += src[k];
                           }
                         }
                       });
                       t.accumulate(id, gx);
                     });
}

Var mean_over_axis(const Var& x, long axis) {
  Tape& tape = tape_of(x, "mean_over_axis");
  const Shape& s = x.shape();
  const std::size_t ax = normalize_axis(axis, s.size());
  const AxisSplit sp = split_at(s, ax);
  if (sp.len == 0) throw DimensionError("mean_over_axis: empty axis");
  Shape os = s;
  os.erase(os.begin() + static_cast<long>(ax));
  Tensor out(os, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    const T inv = T(1) / static_cast<T>(sp.len);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t j = 0; j < sp.len; ++j)
        for (std::size_t i = 0; i < sp.inner; ++i)
          dst[o * sp.inner + i] += src[(o * sp.len + j) * sp.inner + i];
      for (std::size_t i = 0; i < sp.inner; ++i) dst[o * sp.inner + i] *= inv;
    }
  });
  const std::size_t id = x.id();
  return tape.record(std::move(out), {id}, [id, s, sp](const Tensor& g, Tape& t) {
    Tensor gx(s, g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = g.data<T>();
      auto dst = gx.mutable_data<T>();
      const T inv = T(1) / static_cast<T>(sp.len);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.len; ++j)
          for (std::size_t i = 0; i < sp.inner; ++i)
            dst[(o * sp.len + j) * sp.inner + i] = src[o * sp.inner + i] * inv;
    });
    t.accumulate(id, gx);
  });
}

Var sum(const Var& x) {
  Tape& tape = tape_of(x, "sum");
  Tensor out(Shape{}, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T acc = 0;
    for (T v : x.value().data<T>()) acc += v;
    out.mutable_data<T>()[0] = acc;
  });
  const std::size_t id = x.id();
  Shape s = x.shape();
  return tape.record(std::move(out), {id}, [id, s](const Tensor& g, Tape& t) {
    t.accumulate(id, Tensor::full(s, g.item(0), g.dtype()));
  });
}

Var mean(const Var& x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return divide(sum(x), static_cast<double>(n));
}

Var softmax_rows(const Var& x) {
  Tape& tape = tape_of(x, "softmax_rows");
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) throw DimensionError("softmax_rows: empty last dimension");
  const std::size_t k = s.back();
  const std::size_t rows = shape_numel(s) / k;
  Tensor out(s, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* in = src.data() + r * k;
      T* o = dst.data() + r * k;
      const T mx = *std::max_element(in, in + k);
      T z = 0;
      for (std::size_t j = 0; j < k; ++j) {
        o[j] = std::exp(in[j] - mx);
        z += o[j];
      }
      for (std::size_t j = 0; j < k; ++j) o[j] /= z;
    }
  });
  const std::size_t id = x.id();
  Tensor y = out;
  return tape.record(std::move(out), {id}, [id, y, k, rows](const Tensor& g, Tape& t) {
    Tensor gx(y.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto yv = y.data<T>();
      auto gv = g.data<T>();
      auto dst = gx.mutable_data<T>();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * k;
        T dot = 0;
        for (std::size_t j = 0; j < k; ++j) dot += gv[off + j] * yv[off + j];
        for (std::size_t j = 0; j < k; ++j) dst[off + j] = yv[off + j] * (gv[off + j] - dot);
      }
    });
    t.accumulate(id, gx);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape& tape = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) throw DimensionError("layer_norm: empty last dimension");
  const std::size_t d = s.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  const std::size_t rows = shape_numel(s) / d;
  Tensor out(s, x.dtype());
  Tensor xhat(s, x.dtype());
  std::vector<double> rstd(rows);
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto gv = gain.value().data<T>();
    auto bv = bias.value().data<T>();
    auto xh = xhat.mutable_data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* in = src.data() + r * d;
      double mu = 0;
      for (std::size_t j = 0; j < d; ++j) mu += in[j];
      mu /= static_cast<double>(d);
      double var = 0;
      for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
      var /= static_cast<double>(d);
      rstd[r] = 1.0 / std::sqrt(var + eps);
      for (std::size_t j = 0; j < d; ++j) {
        const T h = static_cast<T>((in[j] - mu) * rstd[r]);
        xh[r * d + j] = h;
        dst[r * d + j] = gv[j] * h + bv[j];
      }
    }
  });
  const std::size_t idx = x.id();
  const std::size_t idg = gain.id();
  const std::size_t idb = bias.id();
  return tape.record(
      std::move(out), {idx, idg, idb},
      [idx, idg, idb, xhat, rstd = std::move(rstd), d, rows](const Tensor& g, Tape& t) {
        Tensor gx(xhat.shape(), g.dtype());
        Tensor gg(Shape{d}, g.dtype());
        Tensor gb(Shape{d}, g.dtype());
        visit_dtype(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto go = g.data<T>();
          auto xh = xhat.data<T>();
          auto gain_v = t.value(idg).data<T>();
          auto dx = gx.mutable_data<T>();
          auto dg = gg.mutable_data<T>();
          auto db = gb.mutable_data<T>();
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * d;
            double m1 = 0;
            double m2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = static_cast<double>(go[off + j]) * gain_v[j];
              m1 += gh;
              m2 += gh * xh[off + j];
              dg[j] += go[off + j] * xh[off + j];
              db[j] += go[off + j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const double gh = static_cast<double>(go[off + j]) * gain_v[j];
              dx[off + j] = static_cast<T>(rstd[r] * (gh - m1 - xh[off + j] * m2));
            }
          }
        });
        t.accumulate(idx, gx);
        t.accumulate(idg, gg);
        t.accumulate(idb, gb);
      });
}

Var gather_rows(const Var& x, std::span<const std::int64_t> idx) {
  Tape& tape = tape_of(x, "gather_rows");
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("gather_rows: rank must be >= 1");
  const std::size_t n = s[0];
  const std::size_t row = n == 0 ? 0 : shape_numel(s) / n;
  for (std::int64_t i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) {
      throw ContractError("gather_rows: index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(n) + ")");
    }
  }
  Shape os = s;
  os[0] = idx.size();
  Tensor out(os, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(src.data() + static_cast<std::size_t>(idx[i]) * row, row, dst.data() + i * row);
    }
  });
  const std::size_t id = x.id();
  std::vector<std::int64_t> ix(idx.begin(), idx.end());
  return tape.record(std::move(out), {id}, [id, s, row, ix = std::move(ix)](const Tensor& g, Tape& t) {
    Tensor gx(s, g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto src = g.data<T>();
      auto dst = gx.mutable_data<T>();
      for (std::size_t i = 0; i < ix.size(); ++i) {
        T* d = dst.data() + static_cast<std::size_t>(ix[i]) * row;
        const T* sr = src.data() + i * row;
        for (std::size_t j = 0; j < row; ++j) d[j] += sr[j];
      }
    });
    t.accumulate(id, gx);
  });
}

Var weighted_gather(const Var& x, std::span<const std::int64_t> idx,
                    std::span<const double> weights, std::size_t p) {
  Tape& tape = tape_of(x, "weighted_gather");
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("weighted_gather: rank must be >= 1");
  if (p == 0 || idx.size() % p != 0 || weights.size() != idx.size()) {
    throw DimensionError("weighted_gather: index/weight lists must hold q*p entries");
  }
  const std::size_t n = s[0];
  const std::size_t row = n == 0 ? 0 : shape_numel(s) / n;
  for (std::int64_t i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) {
      throw ContractError("weighted_gather: index out of range");
    }
  }
  const std::size_t q = idx.size() / p;
  Shape os = s;
  os[0] = q;
  Tensor out(os, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = x.value().data<T>();
    auto dst = out.mutable_data<T>();
    for (std::size_t i = 0; i < q; ++i) {
      T* d = dst.data() + i * row;
      for (std::size_t j = 0; j < p; ++j) {
        const T w = static_cast<T>(weights[i * p + j]);
        const T* sr = src.data() + static_cast<std::size_t>(idx[i * p + j]) * row;
        for (std::size_t c = 0; c < row; ++c) d[c] += w * sr[c];
      }
    }
  });
  const std::size_t id = x.id();
  std::vector<std::int64_t> ix(idx.begin(), idx.end());
  std::vector<double> wv(weights.begin(), weights.end());
  return tape.record(std::move(out), {id},
                     [id, s, row, p, q, ix = std::move(ix), wv = std::move(wv)](const Tensor& g,
                                                                               Tape& t) {
                       Tensor gx(s, g.dtype());
                       visit_dtype(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         auto src = g.data<T>();
                         auto dst = gx.mutable_data<T>();
                         for (std::size_t i = 0; i < q; ++i) {
                           const T* sr = src.data() + i * row;
                           for (std::size_t j = 0; j < p; ++j) {
                             const T w = static_cast<T>(wv[i * p + j]);
                             T* d = dst.data() + static_cast<std::size_t>(ix[i * p + j]) * row;
                             for (std::size_t c = 0; c < row; ++c) d[c] += w * sr[c];
                           }
                         }
                       });
                       t.accumulate(id, gx);
                     });
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels,
                  std::optional<std::int32_t> ignore_label) {
  Tape& tape = tape_of(logits, "cross_entropy");
  const Shape& s = logits.shape();
  if (s.size() != 2) throw DimensionError("cross_entropy: logits must be [rows, classes]");
  const std::size_t rows = s[0];
  const std::size_t c = s[1];
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  std::size_t count = 0;
  for (std::int32_t l : labels) {
    if (ignore_label && l == *ignore_label) continue;
    if (l < 0 || static_cast<std::size_t>(l) >= c) {
      throw ContractError("cross_entropy: label " + std::to_string(l) + " outside [0, " +
                          std::to_string(c) + ")");
    }
    ++count;
  }
  if (count == 0) throw ContractError("cross_entropy: every row is ignored");
  Tensor probs(s, logits.dtype());
  double total = 0;
  visit_dtype(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = logits.value().data<T>();
    auto pr = probs.mutable_data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* in = src.data() + r * c;
      const double mx = *std::max_element(in, in + c);
      double z = 0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < c; ++j) pr[r * c + j] = static_cast<T>(std::exp(in[j] - lse));
      if (ignore_label && labels[r] == *ignore_label) continue;
      total += lse - in[labels[r]];
    }
  });
  Tensor out = Tensor::full(Shape{}, total / static_cast<double>(count), logits.dtype());
  const std::size_t id = logits.id();
  std::vector<std::int32_t> lab(labels.begin(), labels.end());
  return tape.record(std::move(out), {id},
                     [id, probs, lab = std::move(lab), ignore_label, count, rows, c](
                         const Tensor& g, Tape& t) {
                       Tensor gx(probs.shape(), g.dtype());
                       const double k = g.item(0) / static_cast<double>(count);
                       visit_dtype(g.dtype(), [&](auto tag) {
                         using T = decltype(tag);
                         auto pr = probs.data<T>();
                         auto dst = gx.mutable_data<T>();
                         for (std::size_t r = 0; r < rows; ++r) {
                           if (ignore_label && lab[r] == *ignore_label) continue;
                           for (std::size_t j = 0; j < c; ++j) {
                             const double onehot = static_cast<std::size_t>(lab[r]) == j ? 1.0 : 0.0;
                             dst[r * c + j] = static_cast<T>(k * (pr[r * c + j] - onehot));
                           }
                         }
                       });
                       t.accumulate(id, gx);
                     });
}

}  // namespace pst2
