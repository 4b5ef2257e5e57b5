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

#include "pst2/metrics.h"

#include <limits>
#include <string>

#include "pst2/errors.h"

namespace pst2 {

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::int32_t> pred,
                                                       std::span<const std::int32_t> truth,
                                                       std::size_t num_classes,
                                                       std::optional<std::int32_t> ignore) {
  if (pred.size() != truth.size()) {
    throw DimensionError("metrics: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  std::vector<std::vector<std::size_t>> cm(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (ignore && truth[i] == *ignore) continue;
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(pred[i]);
    if (truth[i] < 0 || pred[i] < 0 || t >= num_classes || p >= num_classes) {
      throw ContractError("metrics: label outside [0, " + std::to_string(num_classes) + ")");
    }
    ++cm[t][p];
  }
  return cm;
}

Metrics compute_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                        std::size_t num_classes, std::optional<std::int32_t> ignore) {
  const auto cm = confusion_matrix(pred, truth, num_classes, ignore);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Metrics m;
  m.per_class_iou.assign(num_classes, nan);
  m.per_class_recall.assign(num_classes, nan);
  std::size_t correct = 0;
  std::size_t iou_classes = 0;
  std::size_t acc_classes = 0;
  double iou_sum = 0;
  double acc_sum = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t tp = cm[c][c];
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      row += cm[c][k];
      col += cm[k][c];
    }
    m.total += row;
    correct += tp;
    const std::size_t uni = row + col - tp;
    if (uni > 0) {
      m.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
      iou_sum += m.per_class_iou[c];
      ++iou_classes;
    }
    if (row > 0) {
      m.per_class_recall[c] = static_cast<double>(tp) / static_cast<double>(row);
      acc_sum += m.per_class_recall[c];
      ++acc_classes;
    }
  }
  m.miou = iou_classes ? iou_sum / static_cast<double>(iou_classes) : 0.0;
  m.macc = acc_classes ? acc_sum / static_cast<double>(acc_classes) : 0.0;
  m.oacc = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

}  // namespace pst2
