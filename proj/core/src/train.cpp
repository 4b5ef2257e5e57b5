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

#include "pst2/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <unordered_map>

#include "json.hpp"

#include "pst2/errors.h"
#include "pst2/parallel.h"

namespace pst2 {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kTestSplitStream = 0x7e57;
constexpr std::uint64_t kBatchOrderStream = 0xba7c;

std::vector<std::int32_t> argmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  const auto v = logits.to_vector();
  std::vector<std::int32_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * cols;
    out[r] = static_cast<std::int32_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

void put_metrics(ordered_json& j, const Metrics& m) {
  j["per_class_iou"] = m.per_class_iou;
  j["per_class_recall"] = m.per_class_recall;
  j["miou"] = m.miou;
  j["macc"] = m.macc;
  j["oacc"] = m.oacc;
}

ordered_json metrics_fields(const Metrics& m) {
  ordered_json j;
  put_metrics(j, m);
  return j;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::pair<Dataset, Dataset> generate_datasets(const RunConfig& cfg) {
  Dataset train_set, test_set;
  train_set.task = test_set.task = cfg.task;
  SceneSpec test_spec = cfg.scene;
  test_spec.seed = derive_seed(cfg.scene.seed, kTestSplitStream);
  if (cfg.task == Task::kSeg) {
    train_set.sequences = gen_seg_dataset(cfg.scene, cfg.train_sequences);
    test_set.sequences = gen_seg_dataset(test_spec, cfg.test_sequences);
  } else {
    auto fill = [&](Dataset& d, const SceneSpec& spec, std::size_t count) {
      for (auto& item : gen_cls_dataset(spec, count, cfg.cls.num_classes)) {
        d.sequences.push_back(std::move(item.sequence));
        d.labels.push_back(item.label);
      }
    };
    fill(train_set, cfg.scene, cfg.train_sequences);
    fill(test_set, test_spec, cfg.test_sequences);
  }
  return {std::move(train_set), std::move(test_set)};
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  ordered_json index;
  index["task"] = task_name(data.task);
  index["count"] = data.size();
  ordered_json items = ordered_json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%05zu.psts", i);
    write_sequence_file(dir / name, data.sequences[i]);
    ordered_json item;
    item["file"] = name;
    if (data.task == Task::kCls) item["label"] = data.labels.at(i);
    items.push_back(item);
  }
  index["sequences"] = items;
  write_file_atomic(dir / "dataset.json", index.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "dataset.json");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "dataset.json").string() + ": " + e.what());
  }
  Dataset d;
  try {
    d.task = parse_task(index.at("task").get<std::string>());
    for (const auto& item : index.at("sequences")) {
      d.sequences.push_back(read_sequence_file(dir / item.at("file").get<std::string>()));
      if (d.task == Task::kCls) d.labels.push_back(item.at("label").get<std::int32_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "dataset.json").string() + ": " + e.what());
  }
  return d;
}

std::pair<Dataset, Dataset> load_or_generate(RunConfig& cfg) {
  if (cfg.train_dir.empty()) return generate_datasets(cfg);
  Dataset train_set = read_dataset(cfg.train_dir);
  Dataset test_set;
  test_set.task = cfg.task;
  if (!cfg.test_dir.empty()) test_set = read_dataset(cfg.test_dir);
  if (train_set.task != cfg.task || test_set.task != cfg.task) {
    throw ContractError("dataset task does not match the configured task " + task_name(cfg.task));
  }
  if (train_set.size() == 0) throw ContractError("training set is empty");
  const PointCloudSequence& first = train_set.sequences.front();
  if (cfg.task == Task::kSeg) {
    cfg.seg.num_classes = first.num_classes;
    cfg.seg.feat_width = first.feat_width();
    cfg.seg.validate();
  } else {
    cfg.cls.feat_width = first.feat_width();
    std::int32_t top = 0;
    for (auto l : train_set.labels) top = std::max(top, l);
    cfg.cls.num_classes = std::max<std::size_t>(cfg.cls.num_classes, static_cast<std::size_t>(top) + 1);
    cfg.cls.validate();
  }
  cfg.train_sequences = train_set.size();
  cfg.test_sequences = test_set.size();
  return {std::move(train_set), std::move(test_set)};
}

Model::Model(const RunConfig& cfg) : task_(cfg.task), ignore_label_(cfg.ignore_label) {
  if (task_ == Task::kSeg) {
    seg_.emplace(cfg.seg, cfg.dtype, cfg.seed);
  } else {
    cls_.emplace(cfg.cls, cfg.dtype, cfg.seed);
  }
}

std::vector<Param*> Model::params() { return seg_ ? seg_->params() : cls_->params(); }

std::size_t Model::num_classes() const {
  return seg_ ? seg_->config().num_classes : cls_->config().num_classes;
}

PreparedData Model::prepare(const Dataset& data, std::size_t threads) const {
  if (data.task != task_) throw ContractError("Model::prepare: dataset is for a different task");
  PreparedData p;
  p.data = &data;
  if (seg_) {
    p.seg.resize(data.size());
    parallel_for(data.size(), [&](std::size_t i) { p.seg[i] = seg_->prepare(data.sequences[i]); },
                 threads);
  } else {
    p.cls.resize(data.size());
    parallel_for(data.size(), [&](std::size_t i) { p.cls[i] = cls_->prepare(data.sequences[i]); },
                 threads);
  }
  return p;
}

Var Model::logits(Tape& tape, const PreparedData& prepared, std::size_t index) {
  const PointCloudSequence& seq = prepared.data->sequences.at(index);
  if (seg_) {
    const auto frames = seg_->forward(tape, seq, prepared.seg.at(index));
    return concat(frames, 0);
  }
  return cls_->forward(tape, seq, prepared.cls.at(index));
}

std::vector<std::int32_t> Model::targets(const Dataset& data, std::size_t index) const {
  if (task_ == Task::kCls) return {data.labels.at(index)};
  std::vector<std::int32_t> out;
  for (const auto& f : data.sequences.at(index).frames) {
    if (!f.labels) throw ContractError("segmentation sequence without labels");
    out.insert(out.end(), f.labels->begin(), f.labels->end());
  }
  return out;
}

Var Model::loss(Tape& tape, const PreparedData& prepared, std::size_t index) {
  const auto t = targets(*prepared.data, index);
  return cross_entropy(logits(tape, prepared, index), t, ignore_label_);
}

Model::Score Model::score(const PreparedData& prepared, std::size_t index) {
  Tape tape;
  const Var z = logits(tape, prepared, index);
  const auto t = targets(*prepared.data, index);
  Score s;
  s.loss = cross_entropy(z, t, ignore_label_).value().item();
  s.pred = argmax_rows(z.value());
  return s;
}

EvalResult evaluate(Model& model, const PreparedData& prepared, std::size_t threads) {
  const Dataset& data = *prepared.data;
  std::vector<Model::Score> scores(data.size());
  parallel_for(data.size(), [&](std::size_t i) { scores[i] = model.score(prepared, i); }, threads);
  std::vector<std::int32_t> pred, truth;
  EvalResult r;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = model.targets(data, i);
    pred.insert(pred.end(), scores[i].pred.begin(), scores[i].pred.end());
    truth.insert(truth.end(), t.begin(), t.end());
    r.loss += scores[i].loss;
  }
  if (data.size() > 0) r.loss /= static_cast<double>(data.size());
  r.metrics = compute_metrics(pred, truth, model.num_classes());
  return r;
}

TrainResult train(const RunConfig& cfg, const Dataset& train_set, const Dataset* test_set,
                  const TrainOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (train_set.size() == 0) throw ContractError("train: empty training set");
  TrainResult result;
  result.config = cfg;
  Model model(cfg);
  const std::vector<Param*> params = model.params();
  std::unordered_map<const Param*, std::size_t> slot;
  for (std::size_t i = 0; i < params.size(); ++i) slot[params[i]] = i;

  const PreparedData prep = model.prepare(train_set, opts.threads);
  std::optional<PreparedData> test_prep;
  if (test_set != nullptr && test_set->size() > 0) test_prep = model.prepare(*test_set, opts.threads);
  result.train_before = evaluate(model, prep, opts.threads);

  AdamState adam(cfg.lr);
  std::mt19937_64 order_rng(derive_seed(cfg.seed, kBatchOrderStream));
  std::vector<std::size_t> order(train_set.size());
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(cfg.batch, train_set.size());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> items;
    while (items.size() < batch) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      items.push_back(order[cursor++]);
    }
    std::vector<std::vector<std::pair<Param*, Tensor>>> grads(batch);
    std::vector<double> losses(batch);
    parallel_for(
        batch,
        [&](std::size_t b) {
          Tape tape;
          const Var l = model.loss(tape, prep, items[b]);
          tape.backward(l);
          losses[b] = l.value().item();
          grads[b] = tape.param_grads();
        },
        opts.threads);

    // Fixed-order reduction keeps the update independent of thread count.
    for (Param* p : params) p->zero_grad();
    for (std::size_t b = 0; b < batch; ++b) {
      for (auto& [p, g] : grads[b]) {
        Param& dst = *params[slot.at(p)];
        visit_dtype(dst.grad.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto out = dst.grad.mutable_data<T>();
          auto in = g.template data<T>();
          for (std::size_t j = 0; j < out.size(); ++j) out[j] += in[j];
        });
      }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    for (Param* p : params) {
      visit_dtype(p->grad.dtype(), [&](auto tag) {
        using T = decltype(tag);
        for (auto& v : p->grad.template mutable_data<T>()) v = static_cast<T>(v * inv);
      });
    }
    adam_step(params, adam);

    double mean = 0;
    for (double l : losses) mean += l;
    mean *= inv;
    result.step_losses.push_back(mean);
    if (opts.on_step) opts.on_step(step, mean);
  }

  result.train_after = evaluate(model, prep, opts.threads);
  if (test_prep) result.test_after = evaluate(model, *test_prep, opts.threads);
  result.checkpoint = make_checkpoint(cfg.to_kv().to_text(), params);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::string metrics_json(const RunConfig& cfg, const EvalResult& eval, const std::string& split) {
  ordered_json j;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["split"] = split;
  put_metrics(j, eval.metrics);
  j["loss"] = eval.loss;
  j["steps"] = cfg.steps;
  return j.dump(2) + "\n";
}

void write_run_outputs(const std::filesystem::path& dir, const TrainResult& result,
                       std::size_t threads) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  const RunConfig& cfg = result.config;
  write_checkpoint(dir / "checkpoint.pstw", result.checkpoint);
  write_file_atomic(dir / "config.txt", cfg.to_kv().to_text());
  const bool has_test = result.test_after.has_value();
  write_file_atomic(dir / "metrics.json",
                    metrics_json(cfg, has_test ? *result.test_after : result.train_after,
                                 has_test ? "test" : "train"));

  ordered_json m;
  m["config_hash"] = cfg.hash();
  m["task"] = task_name(cfg.task);
  m["seed"] = cfg.seed;
  m["preset"] = {{"name", cfg.preset},
                 {"lr", cfg.lr},
                 {"batch", cfg.batch},
                 {"points", cfg.points},
                 {"frames", cfg.frames}};
  m["steps"] = cfg.steps;
  m["threads"] = threads;
  m["wall_time"] = result.wall_time;
  m["loss_initial"] = result.train_before.loss;
  m["loss_final"] = result.train_after.loss;
  m["train"] = metrics_fields(result.train_after.metrics);
  if (has_test) m["test"] = metrics_fields(result.test_after->metrics);
  m["step_losses"] = result.step_losses;
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

std::string evaluate_checkpoint_json(const Checkpoint& ckpt, const Dataset& data, std::size_t threads) {
  const RunConfig cfg = resolve_run_config(KeyValueConfig::parse(ckpt.config_text));
  if (data.task != cfg.task) throw ContractError("evaluate: dataset task does not match checkpoint");
  Model model(cfg);
  const auto params = model.params();
  load_checkpoint_into(ckpt, params);
  const PreparedData prep = model.prepare(data, threads);
  return metrics_json(cfg, evaluate(model, prep, threads), "eval");
}

double AblationReport::median(const std::string& name) const {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (r.name == name) v.push_back(r.score);
  }
  return median_of(std::move(v));
}

std::string AblationReport::to_json() const {
  ordered_json j;
  j["task"] = task_name(task);
  j["metric"] = task == Task::kSeg ? "test_miou" : "test_accuracy";
  ordered_json runs_json = ordered_json::array();
  for (const auto& r : runs) runs_json.push_back({{"config", r.name}, {"seed", r.seed}, {"score", r.score}});
  j["runs"] = runs_json;
  ordered_json med;
  for (const auto& c : configs) med[c] = median(c);
  j["median"] = med;
  ordered_json delta;
  const double base = median(configs.front());
  for (std::size_t i = 1; i < configs.size(); ++i) delta[configs[i]] = median(configs[i]) - base;
  j["delta_vs_" + configs.front()] = delta;
  return j.dump(2) + "\n";
}

AblationReport run_ablation(const RunConfig& base, const std::vector<std::string>& flags,
                            const std::vector<std::uint64_t>& seeds, const TrainOptions& opts) {
  AblationReport report;
  report.task = base.task;
  std::vector<std::pair<std::string, RunConfig>> grid;
  if (base.task == Task::kCls) {
    for (const auto& f : flags) {
      if (f != "stsa") throw ContractError("ablate: classification supports only the stsa flag");
    }
    RunConfig pool = base, attn = base;
    pool.cls.temporal = TemporalMode::kMeanPool;
    attn.cls.temporal = TemporalMode::kStsa;
    grid = {{"meanpool", pool}, {"stsa", attn}};
  } else {
    bool re = false, stsa = false;
    for (const auto& f : flags) {
      if (f == "re") {
        re = true;
      } else if (f == "stsa") {
        stsa = true;
      } else {
        throw ContractError("ablate: unknown flag '" + f + "' (expected re and/or stsa)");
      }
    }
    if (!re && !stsa) throw ContractError("ablate: no flags given");
    for (int use_stsa = 0; use_stsa <= (stsa ? 1 : 0); ++use_stsa) {
      for (int use_re = 0; use_re <= (re ? 1 : 0); ++use_re) {
        RunConfig c = base;
        if (re) c.seg.use_re = use_re;
        if (stsa) c.seg.use_stsa = use_stsa;
        std::string name;
        if (re && use_re) name += "+re";
        if (stsa && use_stsa) name += "+stsa";
        grid.emplace_back(name.empty() ? "base" : name, c);
      }
    }
  }
  RunConfig data_cfg = base;
  const auto [train_set, test_set] = load_or_generate(data_cfg);
  for (const auto& [name, c] : grid) report.configs.push_back(name);
  for (std::uint64_t seed : seeds) {
    for (auto [name, c] : grid) {
      c.seed = seed;
      const TrainResult r = train(c, train_set, &test_set, opts);
      const EvalResult& e = r.test_after ? *r.test_after : r.train_after;
      report.runs.push_back({name, seed, c.task == Task::kSeg ? e.metrics.miou : e.metrics.oacc});
    }
  }
  return report;
}

}  // namespace pst2
