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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pst2/config.h"
#include "pst2/formats.h"
#include "pst2/metrics.h"
#include "pst2/optim.h"

namespace pst2 {

/// Sequences for either task; `labels` holds one class per sequence for
/// classification and is empty for segmentation.
struct Dataset {
  Task task = Task::kSeg;
  std::vector<PointCloudSequence> sequences;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return sequences.size(); }
};

/// Generated train and test splits for a run; the test split uses its own
/// derived seed.
std::pair<Dataset, Dataset> generate_datasets(const RunConfig& cfg);

/// Directory layout: dataset.json plus one .psts file per sequence.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

/// A dataset together with its coordinate-only precomputation.
struct PreparedData {
  const Dataset* data = nullptr;
  std::vector<SegGeometry> seg;
  std::vector<ClsGeometry> cls;
};

/// A network of either kind behind one interface.
class Model {
 public:
  explicit Model(const RunConfig& cfg);

  Task task() const { return task_; }
  std::vector<Param*> params();

  PreparedData prepare(const Dataset& data, std::size_t threads) const;
  /// Mean cross-entropy of sequence `index`.
  Var loss(Tape& tape, const PreparedData& prepared, std::size_t index);
  struct Score {
    double loss = 0;
    /// Per-point labels (frame-major) for segmentation, one label for
    /// classification.
    std::vector<std::int32_t> pred;
  };
  Score score(const PreparedData& prepared, std::size_t index);
  /// Ground truth laid out like Score::pred.
  std::vector<std::int32_t> targets(const Dataset& data, std::size_t index) const;
  std::size_t num_classes() const;

 private:
  Var logits(Tape& tape, const PreparedData& prepared, std::size_t index);

  Task task_;
  std::optional<std::int32_t> ignore_label_;
  std::optional<SegNet> seg_;
  std::optional<ClsNet> cls_;
};

struct EvalResult {
  Metrics metrics;
  double loss = 0;  // mean per-sequence loss
};

EvalResult evaluate(Model& model, const PreparedData& prepared, std::size_t threads);

struct TrainResult {
  RunConfig config;
  std::vector<double> step_losses;  // mean batch loss before each update
  EvalResult train_before;
  EvalResult train_after;
  std::optional<EvalResult> test_after;
  Checkpoint checkpoint;
  double wall_time = 0;  // seconds
};

struct TrainOptions {
  std::size_t threads = 1;
  /// Called after every step with (step index, batch loss).
  std::function<void(std::size_t, double)> on_step;
};

TrainResult train(const RunConfig& cfg, const Dataset& train_set, const Dataset* test_set,
                  const TrainOptions& opts);

/// Reproducible metrics record: {config_hash, seed, split, per_class_iou,
/// miou, macc, oacc, loss, steps}. Contains no timing, so equal runs give
/// byte-identical text.
std::string metrics_json(const RunConfig& cfg, const EvalResult& eval, const std::string& split);

/// Writes checkpoint.pstw, metrics.json, config.txt and manifest.json (the
/// manifest carries wall time, thread count and the loss curve).
void write_run_outputs(const std::filesystem::path& dir, const TrainResult& result,
                       std::size_t threads);

/// Loads the train/test directories named by `cfg` or generates both splits.
/// With on-disk data, class count and feature width are taken from the files.
std::pair<Dataset, Dataset> load_or_generate(RunConfig& cfg);

/// Rebuilds the model from a checkpoint and scores `data`.
std::string evaluate_checkpoint_json(const Checkpoint& ckpt, const Dataset& data, std::size_t threads);

/// One row of an ablation grid.
struct AblationRun {
  std::string name;  // "base", "+re", "+stsa", "+re+stsa" or "meanpool"/"stsa"
  std::uint64_t seed = 0;
  double score = 0;  // test mIoU (seg) or test accuracy (cls)
};

struct AblationReport {
  Task task = Task::kSeg;
  std::vector<AblationRun> runs;
  std::vector<std::string> configs;

  double median(const std::string& name) const;
  std::string to_json() const;
};

/// Segmentation: every combination of the requested flags ("re", "stsa"),
/// 4 configurations for both. Classification: STSA against mean pooling.
AblationReport run_ablation(const RunConfig& base, const std::vector<std::string>& flags,
                            const std::vector<std::uint64_t>& seeds, const TrainOptions& opts);

}  // namespace pst2
