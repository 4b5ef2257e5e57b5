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

#include "pst2/stsa.h"

#include <cmath>
#include <cstdint>

#include "pst2/errors.h"

namespace pst2 {

void STSAConfig::validate() const {
  if (in_dim == 0 || dim == 0) throw ContractError("STSAConfig: widths must be positive");
  if (window == 0 || stride == 0) throw ContractError("STSAConfig: window and stride must be >= 1");
}

std::size_t STSAConfig::num_windows(std::size_t frames) const {
  if (window > frames) {
    throw ContractError("STSA: window " + std::to_string(window) + " exceeds sequence length " +
                        std::to_string(frames));
  }
  return (frames - window) / stride + 1;
}

STSAParams::STSAParams(const std::string& name, STSAConfig c, DType dtype, std::mt19937_64& rng)
    : cfg(c) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  auto square = [&](const std::string& n, std::size_t fan_in, std::size_t rows, std::size_t cols) {
    const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Param(name + "." + n, Tensor::uniform({rows, cols}, -b, b, dtype, rng));
  };
  temporal_conv = square("temporal_conv", cfg.window * cfg.in_dim, cfg.window * cfg.in_dim, d);
  wq = square("wq", d, d, d);
  wk = square("wk", d, d, d);
  wv = square("wv", d, d, d);
  const std::size_t widths[] = {2 * d, d};
  ffn = Mlp(name + ".ffn", d, widths, Activation::kNone, dtype, rng);
  ln_gain = Param(name + ".ln_gain", Tensor::full({d}, 1.0, dtype));
  ln_bias = Param(name + ".ln_bias", Tensor::zeros({d}, dtype));
}

void STSAParams::collect_params(std::vector<Param*>& out) {
  out.push_back(&temporal_conv);
  out.push_back(&wq);
  out.push_back(&wk);
  out.push_back(&wv);
  ffn.collect_params(out);
  out.push_back(&ln_gain);
  out.push_back(&ln_bias);
}

PatchSet patch_division(Tape& tape, std::span<const Var> frame_feats, STSAParams& params) {
  const STSAConfig& cfg = params.cfg;
  if (frame_feats.empty()) throw ContractError("patch_division: no frames");
  const std::size_t frames = frame_feats.size();
  const std::size_t m = frame_feats[0].dim(0);
  for (const Var& f : frame_feats) {
    if (f.shape().size() != 2) throw DimensionError("patch_division: frame features must be [m, d]");
    if (f.dim(0) != m) {
      throw AlignmentError("patch_division: frames carry " + std::to_string(m) + " and " +
                           std::to_string(f.dim(0)) + " seeds; features must share one seed set");
    }
    if (f.dim(1) != cfg.in_dim) {
      throw DimensionError("patch_division: frame width " + std::to_string(f.dim(1)) +
                           " != configured " + std::to_string(cfg.in_dim));
    }
  }
  PatchSet ps;
  ps.frames = frames;
  ps.seeds = m;
  ps.window = cfg.window;
  ps.stride = cfg.stride;
  ps.num_windows = cfg.num_windows(frames);
  Var conv = tape.param(params.temporal_conv);
  std::vector<Var> per_window;
  for (std::size_t w = 0; w < ps.num_windows; ++w) {
    const std::size_t first = w * cfg.stride;
    std::vector<Var> cols(frame_feats.begin() + static_cast<long>(first),
                          frame_feats.begin() + static_cast<long>(first + cfg.window));
    Var stacked = cols.size() == 1 ? cols[0] : concat(cols, 1);
    per_window.push_back(matmul(stacked, conv));
    for (std::size_t j = 0; j < m; ++j) ps.index_map.push_back({j, w, first});
  }
  ps.tokens = per_window.size() == 1 ? per_window[0] : concat(per_window, 0);
  return ps;
}

std::pair<Var, AttentionTrace> self_attention(Tape& tape, const PatchSet& patches,
                                              STSAParams& params) {
  const Var& f = patches.tokens;
  if (!f.valid() || f.shape().size() != 2 || f.dim(0) == 0) {
    throw ContractError("self_attention: need at least one token");
  }
  const std::size_t d = params.cfg.dim;
  if (f.dim(1) != d) throw DimensionError("self_attention: token width mismatch");
  Var q = matmul(f, tape.param(params.wq));
  Var k = matmul(f, tape.param(params.wk));
  Var v = matmul(f, tape.param(params.wv));
  Var a1 = matmul(q, transpose_last2(k));
  Var a2 = divide(a1, std::sqrt(static_cast<double>(d)));
  Var a3 = softmax_rows(a2);
  Var out = matmul(a3, v);
  return {out, AttentionTrace{a1.value(), a2.value(), a3.value()}};
}

Var stsa_forward(Tape& tape, const PatchSet& patches, STSAParams& params, AttentionTrace* trace) {
  auto [sa_out, tr] = self_attention(tape, patches, params);
  if (trace != nullptr) *trace = std::move(tr);
  Var h = params.ffn.forward(tape, add(sa_out, patches.tokens));
  return layer_norm(h, tape.param(params.ln_gain), tape.param(params.ln_bias), 1e-5);
}

std::vector<Var> scatter_tokens(const Var& outputs, const PatchSet& patches) {
  if (outputs.dim(0) != patches.size()) {
    throw DimensionError("scatter_tokens: token count mismatch");
  }
  const std::size_t m = patches.seeds;
  std::vector<Var> frames;
  for (std::size_t t = 0; t < patches.frames; ++t) {
    std::vector<std::size_t> covering;
    for (std::size_t w = 0; w < patches.num_windows; ++w) {
      const std::size_t first = w * patches.stride;
      if (t >= first && t < first + patches.window) covering.push_back(w);
    }
    if (covering.empty()) {
      // Frames skipped by a stride > window borrow the nearest window.
      std::size_t best = 0;
      std::size_t best_gap = SIZE_MAX;
      for (std::size_t w = 0; w < patches.num_windows; ++w) {
        const std::size_t center = w * patches.stride + patches.window / 2;
        const std::size_t gap = center > t ? center - t : t - center;
        if (gap < best_gap) {
          best_gap = gap;
          best = w;
        }
      }
      covering.push_back(best);
    }
    const std::size_t p = covering.size();
    std::vector<std::int64_t> idx(m * p);
    std::vector<double> wts(m * p, 1.0 / static_cast<double>(p));
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < p; ++c)
        idx[j * p + c] = static_cast<std::int64_t>(covering[c] * m + j);
    frames.push_back(weighted_gather(outputs, idx, wts, p));
  }
  return frames;
}

}  // namespace pst2
