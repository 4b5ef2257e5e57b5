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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pst2/autodiff.h"
#include "pst2/point_ops.h"

namespace pst2 {

inline constexpr std::uint16_t kSequenceFileVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Binary sequence container ("PSTS"). Coordinates and features are stored
/// as f32, labels as u16; see docs/FORMATS.md for the byte layout. Every
/// frame must have the same point count and feature width.
std::string encode_sequence(const PointCloudSequence& seq);
/// Throws IoError on a bad magic, unknown version, or truncated input.
PointCloudSequence decode_sequence(const std::string& bytes);

void write_sequence_file(const std::filesystem::path& path, const PointCloudSequence& seq);
PointCloudSequence read_sequence_file(const std::filesystem::path& path);

/// A named parameter snapshot plus the configuration text that produced it.
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> params;  // f32 payloads
};

Checkpoint make_checkpoint(std::string config_text, std::span<Param* const> params);
/// Copies the stored values into `params`, matching by name. Throws
/// IoError when a name is missing or a shape disagrees.
void load_checkpoint_into(const Checkpoint& ckpt, std::span<Param* const> params);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace pst2
