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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pst2/data.h"
#include "pst2/networks.h"

namespace pst2 {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; keys may not repeat.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  /// Semicolon-separated groups of comma-separated sizes, e.g. "32,64;64,128".
  std::vector<std::vector<std::size_t>> get_size_groups(
      const std::string& key, std::vector<std::vector<std::size_t>> fallback) const;

  /// One `key = value` line per entry, sorted by key.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Optimization settings of a named experiment preset.
struct TrainPreset {
  std::string name;
  double lr = 1e-3;
  std::size_t batch = 2;
  std::size_t points = 512;  // points per frame
  std::size_t frames = 3;
};

/// Presets "synthia", "kitti", "msr" and "desk". "msr" has one row per
/// sequence length 4, 8, 12 and 16; `frames` selects the row (default 16).
TrainPreset preset_by_name(const std::string& name, std::optional<std::size_t> frames = std::nullopt,
                           bool classification = false);
std::vector<TrainPreset> msr_preset_rows();

enum class Task { kSeg, kCls };

std::string task_name(Task task);
Task parse_task(const std::string& name);

/// Fully resolved description of one training run.
struct RunConfig {
  Task task = Task::kSeg;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 1;
  double lr = 1e-3;
  std::size_t batch = 2;
  std::size_t steps = 500;
  std::size_t points = 512;
  std::size_t frames = 3;
  std::size_t train_sequences = 4;
  std::size_t test_sequences = 0;
  DType dtype = DType::kFloat32;
  std::optional<std::int32_t> ignore_label;
  SceneSpec scene;
  SegNetConfig seg;
  ClsNetConfig cls;
  /// Directories of .psts files to use instead of generated data.
  std::string train_dir;
  std::string test_dir;

  /// Canonical key-value form; parsing it back yields the same config.
  KeyValueConfig to_kv() const;
  /// FNV-1a of the canonical text, as 16 hex digits.
  std::string hash() const;
};

/// Builds a run from preset defaults, then applies the keys in `kv`.
/// `preset_override`, when set, wins over the `preset` key. Unknown keys
/// are rejected.
RunConfig resolve_run_config(const KeyValueConfig& kv, std::optional<Task> task_override = std::nullopt,
                             std::optional<std::string> preset_override = std::nullopt);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pst2
