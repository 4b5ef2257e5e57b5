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

#include <benchmark/benchmark.h>

#include <random>

#include "pst2/config.h"
#include "pst2/data.h"
#include "pst2/optim.h"
#include "pst2/point_ops.h"
#include "pst2/stsa.h"
#include "pst2/train.h"

namespace pst2 {
namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  Tape tape;
  Var a = tape.constant(Tensor::normal({n, n}, 0, 1, DType::kFloat32, rng));
  Var b = tape.constant(Tensor::normal({n, n}, 0, 1, DType::kFloat32, rng));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Fps(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const Tensor c = Tensor::uniform({n, 3}, 0, 10, DType::kFloat32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fps(c, n / 8));
}
BENCHMARK(BM_Fps)->Arg(2048)->Arg(16384);

void BM_BallQuery(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const Tensor c = Tensor::uniform({n, 3}, 0, 10, DType::kFloat32, rng);
  const SeedSet seeds = fps(c, n / 8);
  for (auto _ : state) benchmark::DoNotOptimize(ball_query(seeds, c, 0.5, 32));
}
BENCHMARK(BM_BallQuery)->Arg(2048)->Arg(16384);

void BM_StsaForward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  STSAParams p("stsa", STSAConfig{128, 128, 3, 1}, DType::kFloat32, rng);
  std::vector<Tensor> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(Tensor::normal({m, 128}, 0, 1, DType::kFloat32, rng));
  for (auto _ : state) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& f : frames) vars.push_back(tape.constant(f));
    benchmark::DoNotOptimize(stsa_forward(tape, patch_division(tape, vars, p), p).value());
  }
}
BENCHMARK(BM_StsaForward)->Arg(32)->Arg(256);

// One forward/backward/update of the desk segmentation network on one sequence.
void BM_SegTrainStep(benchmark::State& state) {
  RunConfig cfg = resolve_run_config(KeyValueConfig::parse("task = seg\npreset = desk\ntrain_sequences = 1\n"));
  const Dataset data = generate_datasets(cfg).first;
  Model model(cfg);
  const PreparedData prep = model.prepare(data, 1);
  auto params = model.params();
  AdamState adam(cfg.lr);
  for (auto _ : state) {
    Tape tape;
    backward(model.loss(tape, prep, 0), params);
    adam_step(params, adam);
  }
}
BENCHMARK(BM_SegTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace pst2

BENCHMARK_MAIN();
