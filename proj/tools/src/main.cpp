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

// pst2 command line: data generation, training, evaluation, gradient
// checks and ablations.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pst2/config.h"
#include "pst2/errors.h"
#include "pst2/formats.h"
#include "pst2/gradcheck.h"
#include "pst2/parallel.h"
#include "pst2/train.h"

namespace fs = std::filesystem;
using namespace pst2;

namespace {

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

std::vector<std::string> split_flags(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_gen_data(const std::string& spec, const std::string& out, const std::optional<std::string>& task) {
  RunConfig cfg = resolve_run_config(load_config(spec), task ? std::optional(parse_task(*task)) : std::nullopt);
  const auto [train_set, test_set] = generate_datasets(cfg);
  write_dataset(fs::path(out) / "train", train_set);
  write_dataset(fs::path(out) / "test", test_set);
  std::printf("wrote %zu train and %zu test %s sequences to %s\n", train_set.size(), test_set.size(),
              task_name(cfg.task).c_str(), out.c_str());
  return 0;
}

RunConfig make_run(const std::string& config, const std::optional<std::string>& task,
                   const std::optional<std::string>& preset, const std::optional<std::uint64_t>& seed,
                   const std::optional<std::size_t>& steps) {
  KeyValueConfig kv = load_config(config);
  if (seed) kv.set("seed", std::to_string(*seed));
  if (steps) kv.set("steps", std::to_string(*steps));
  return resolve_run_config(kv, task ? std::optional(parse_task(*task)) : std::nullopt, preset);
}

int cmd_train(RunConfig cfg, const std::string& out, bool quiet) {
  const auto [train_set, test_set] = load_or_generate(cfg);
  TrainOptions opts;
  opts.threads = thread_count();
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / 20);
  opts.on_step = [&](std::size_t step, double loss) {
    if (!quiet && (step % every == 0 || step + 1 == cfg.steps)) {
      std::fprintf(stderr, "step %zu/%zu loss %.6f\n", step + 1, cfg.steps, loss);
    }
  };
  std::fprintf(stderr, "task %s preset %s lr %g batch %zu points %zu frames %zu seed %llu\n",
               task_name(cfg.task).c_str(), cfg.preset.c_str(), cfg.lr, cfg.batch, cfg.points,
               cfg.frames, static_cast<unsigned long long>(cfg.seed));
  const TrainResult r = train(cfg, train_set, test_set.size() ? &test_set : nullptr, opts);
  write_run_outputs(out, r, opts.threads);
  std::printf("%s", read_file(fs::path(out) / "metrics.json").c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  const std::string json = evaluate_checkpoint_json(read_checkpoint(checkpoint), read_dataset(data), thread_count());
  if (!out.empty()) write_file_atomic(out, json);
  std::printf("%s", json.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& module, std::size_t instances, bool verbose) {
  const GradcheckReport r = run_gradcheck(module, instances);
  std::string current;
  double worst = 0;
  std::size_t count = 0, failed = 0;
  auto flush = [&] {
    if (!current.empty()) {
      std::printf("%-32s %4zu instances  max rel err %.3e  %s\n", current.c_str(), count, worst,
                  failed ? "FAIL" : "ok");
    }
  };
  for (const auto& c : r.cases) {
    const std::string key = c.module + "/" + c.name;
    if (key != current) {
      flush();
      current = key;
      worst = 0;
      count = failed = 0;
    }
    worst = std::max(worst, c.result.rel_err);
    ++count;
    if (!c.passed) ++failed;
    if (verbose || !c.passed) {
      std::printf("  %s #%zu rel err %.3e over %zu coords%s\n", key.c_str(), c.instance, c.result.rel_err,
                  c.result.checked, c.passed ? "" : "  FAIL");
    }
  }
  flush();
  std::printf("gradcheck %s: %zu checks, max rel err %.3e (tolerance %.0e)\n", r.passed() ? "passed" : "FAILED",
              r.cases.size(), r.max_error(), r.tolerance);
  return r.passed() ? 0 : 1;
}

int cmd_ablate(RunConfig cfg, const std::string& flags, std::size_t num_seeds, const std::string& out) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + i);
  TrainOptions opts;
  opts.threads = thread_count();
  const AblationReport report = run_ablation(cfg, split_flags(flags), seeds, opts);
  const std::string json = report.to_json();
  if (!out.empty()) {
    fs::create_directories(out);
    write_file_atomic(fs::path(out) / "ablation.json", json);
  }
  std::printf("%s", json.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pst2: point cloud sequence segmentation and classification"};
  app.require_subcommand(1);

  std::string spec, out, config, checkpoint, data, module = "all", flags = "re,stsa";
  std::optional<std::string> task, preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::size_t instances = 10, seeds = 5;
  bool quiet = false, verbose = false;

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic train/test sequence directories");
  gen->add_option("--spec", spec, "Key-value scene/run config")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--task", task, "seg or cls");

  auto* tr = app.add_subcommand("train", "Train a model and write checkpoint and metrics");
  tr->add_option("--task", task, "seg or cls");
  tr->add_option("--config", config, "Key-value config file")->check(CLI::ExistingFile);
  tr->add_option("--preset", preset, "synthia, kitti, msr or desk");
  tr->add_option("--seed", seed, "Model seed");
  tr->add_option("--steps", steps, "Override the number of optimizer steps");
  tr->add_option("--out", out, "Run directory")->required();
  tr->add_flag("--quiet", quiet, "No per-step progress");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset directory");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--out", out, "Also write the metrics JSON here");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--module", module, "tensor, point-ops, re, stsa, seg, cls or all");
  gc->add_option("--instances", instances, "Random instances per check");
  gc->add_flag("--verbose", verbose, "Print every instance");

  auto* ab = app.add_subcommand("ablate", "Train the flag grid over several seeds");
  ab->add_option("--flags", flags, "Comma-separated: re,stsa (seg) or stsa (cls)");
  ab->add_option("--task", task, "seg or cls");
  ab->add_option("--config", config, "Key-value config file")->check(CLI::ExistingFile);
  ab->add_option("--preset", preset, "synthia, kitti, msr or desk");
  ab->add_option("--seed", seed, "First seed");
  ab->add_option("--seeds", seeds, "Number of seeds");
  ab->add_option("--steps", steps, "Override the number of optimizer steps");
  ab->add_option("--out", out, "Directory for ablation.json");

  auto* show = app.add_subcommand("show-config", "Print the fully resolved run config");
  show->add_option("--task", task, "seg or cls");
  show->add_option("--config", config, "Key-value config file")->check(CLI::ExistingFile);
  show->add_option("--preset", preset, "synthia, kitti, msr or desk");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(spec, out, task);
    if (tr->parsed()) return cmd_train(make_run(config, task, preset, seed, steps), out, quiet);
    if (ev->parsed()) return cmd_eval(checkpoint, data, out);
    if (gc->parsed()) return cmd_gradcheck(module, instances, verbose);
    if (ab->parsed()) return cmd_ablate(make_run(config, task, preset, seed, steps), flags, seeds, out);
    if (show->parsed()) {
      const RunConfig cfg = make_run(config, task, preset, std::nullopt, std::nullopt);
      std::printf("# config_hash %s\n%s", cfg.hash().c_str(), cfg.to_kv().to_text().c_str());
      return 0;
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
