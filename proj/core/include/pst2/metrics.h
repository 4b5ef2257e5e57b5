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
#include <optional>
#include <span>
#include <vector>

namespace pst2 {

/// Segmentation / classification scores from a confusion matrix.
///
/// IoU_c = TP / (TP + FP + FN). mIoU averages over classes that occur in
/// the ground truth or the predictions; mAcc averages per-class recall over
/// classes present in the ground truth. Absent classes report NaN.
struct Metrics {
  std::vector<double> per_class_iou;
  std::vector<double> per_class_recall;
  double miou = 0;
  double macc = 0;
  double oacc = 0;
  std::size_t total = 0;
};

/// Row = true class, column = predicted class.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::int32_t> pred,
                                                       std::span<const std::int32_t> truth,
                                                       std::size_t num_classes,
                                                       std::optional<std::int32_t> ignore = {});

Metrics compute_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                        std::size_t num_classes, std::optional<std::int32_t> ignore = {});

}  // namespace pst2
