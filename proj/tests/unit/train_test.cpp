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

#include <gtest/gtest.h>

#include <filesystem>

#include "pst2/errors.h"
#include "pst2/train.h"

namespace pst2 {
namespace {

namespace fs = std::filesystem;

// Keys in `extra` replace the base ones.
RunConfig with_overrides(const std::string& base, const std::string& extra) {
  KeyValueConfig kv = KeyValueConfig::parse(base);
  const KeyValueConfig over = KeyValueConfig::parse(extra);
  for (const auto& [k, v] : over.entries()) kv.set(k, v);
  return resolve_run_config(kv);
}

RunConfig tiny_run(const std::string& extra = "") {
  return with_overrides("steps = 3\npoints = 320\ntrain_sequences = 2\ntest_sequences = 1\nbatch = 2\n",
                        extra);
}

RunConfig tiny_cls_run(const std::string& extra = "") {
  return with_overrides(
      "task = cls\nsteps = 2\npoints = 64\nframes = 8\ntrain_sequences = 8\ntest_sequences = 4\n"
      "batch = 4\ncls.seeds = 8\n",
      extra);
}

struct RunRecord {
  TrainResult result;
  std::string metrics;
  std::string ckpt;
};

RunRecord run(const RunConfig& cfg, std::size_t threads) {
  auto [tr, te] = generate_datasets(cfg);
  TrainOptions opts;
  opts.threads = threads;
  RunRecord r{train(cfg, tr, cfg.test_sequences ? &te : nullptr, opts), {}, {}};
  r.metrics = metrics_json(cfg, *r.result.test_after, "test");
  r.ckpt = encode_checkpoint(r.result.checkpoint);
  return r;
}

TEST(Train, SameSeedGivesIdenticalRecords) {
  const RunConfig cfg = tiny_run();
  const RunRecord a = run(cfg, 1), b = run(cfg, 1);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.ckpt, b.ckpt);
  EXPECT_EQ(a.result.step_losses, b.result.step_losses);
  ASSERT_EQ(a.result.step_losses.size(), 3u);
  EXPECT_EQ(a.metrics.find("wall"), std::string::npos);
}

TEST(Train, ThreadCountDoesNotChangeResults) {
  const RunConfig cfg = tiny_run();
  const RunRecord a = run(cfg, 1), b = run(cfg, 3);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.ckpt, b.ckpt);
}

TEST(Train, DifferentSeedsDiffer) {
  EXPECT_NE(run(tiny_run("seed = 1\n"), 1).ckpt, run(tiny_run("seed = 2\n"), 1).ckpt);
}

TEST(Train, ZeroLearningRateKeepsMetrics) {
  const RunRecord r = run(tiny_run("lr = 0\n"), 1);
  EXPECT_EQ(r.result.train_before.loss, r.result.train_after.loss);
  EXPECT_EQ(r.result.train_before.metrics.miou, r.result.train_after.metrics.miou);
}

TEST(Train, CheckpointEvaluationReproducesTrainingMetrics) {
  const RunConfig cfg = tiny_run();
  auto [tr, te] = generate_datasets(cfg);
  const TrainResult r = train(cfg, tr, nullptr, {});
  const std::string first = evaluate_checkpoint_json(r.checkpoint, tr, 1);
  const std::string second = evaluate_checkpoint_json(r.checkpoint, tr, 2);
  EXPECT_EQ(first, second);
  EXPECT_EQ(first, metrics_json(cfg, r.train_after, "eval"));
}

TEST(Train, ClassificationRuns) {
  const RunConfig cfg = tiny_cls_run();
  const RunRecord r = run(cfg, 2);
  EXPECT_EQ(r.result.test_after->metrics.total, 4u);
  EXPECT_EQ(r.result.train_after.metrics.total, 8u);
  EXPECT_EQ(r.metrics, run(cfg, 1).metrics);
}

TEST(Train, RunOutputsAreWritten) {
  const RunConfig cfg = tiny_run("steps = 1\n");
  const RunRecord r = run(cfg, 1);
  const fs::path dir = fs::temp_directory_path() / "pst2_train_outputs";
  fs::remove_all(dir);
  write_run_outputs(dir, r.result, 1);
  for (const char* f : {"checkpoint.pstw", "metrics.json", "config.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(read_file(dir / "metrics.json"), r.metrics);
  EXPECT_NE(read_file(dir / "manifest.json").find("wall_time"), std::string::npos);
  EXPECT_EQ(resolve_run_config(KeyValueConfig::load(dir / "config.txt")).hash(), cfg.hash());
  fs::remove_all(dir);
}

TEST(Dataset, DirectoryRoundTrip) {
  const RunConfig cfg = tiny_cls_run();
  const Dataset d = generate_datasets(cfg).first;
  const fs::path dir = fs::temp_directory_path() / "pst2_dataset_rt";
  fs::remove_all(dir);
  write_dataset(dir, d);
  const Dataset back = read_dataset(dir);
  EXPECT_EQ(back.task, Task::kCls);
  EXPECT_EQ(back.labels, d.labels);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(encode_sequence(back.sequences[i]), encode_sequence(d.sequences[i]));
  }
  fs::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), IoError);
}

TEST(Dataset, SplitsUseDifferentSeeds) {
  RunConfig cfg = tiny_run("test_sequences = 2\n");
  auto [tr, te] = generate_datasets(cfg);
  EXPECT_EQ(tr.size(), 2u);
  EXPECT_EQ(te.size(), 2u);
  EXPECT_NE(encode_sequence(tr.sequences[0]), encode_sequence(te.sequences[0]));
}

TEST(Ablation, MediansAndDeltas) {
  AblationReport rep;
  rep.configs = {"base", "+re"};
  rep.runs = {{"base", 0, 0.5}, {"base", 1, 0.7}, {"base", 2, 0.6}, {"+re", 0, 0.9}, {"+re", 1, 0.8}};
  EXPECT_DOUBLE_EQ(rep.median("base"), 0.6);
  EXPECT_DOUBLE_EQ(rep.median("+re"), 0.85);
  const std::string j = rep.to_json();
  EXPECT_NE(j.find("delta_vs_base"), std::string::npos);
}

TEST(Ablation, GridCoversRequestedFlags) {
  const RunConfig cfg = tiny_run("steps = 1\n");
  const AblationReport rep = run_ablation(cfg, {"re"}, {0, 1}, {});
  EXPECT_EQ(rep.configs, (std::vector<std::string>{"base", "+re"}));
  EXPECT_EQ(rep.runs.size(), 4u);
  EXPECT_THROW(run_ablation(tiny_cls_run(), {"re"}, {0}, {}), ContractError);
}

}  // namespace
}  // namespace pst2
