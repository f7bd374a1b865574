// Copyright 2026 The ltbackdoor Authors
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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltb/dataset.hpp"
#include "ltb/tensor.hpp"

namespace ltb::metrics {

using BatchPredictor = std::function<std::vector<int>(const Tensor&)>;
/// Maps a batch of clean images to their triggered versions.
using TriggerFn = std::function<Tensor(const Tensor&)>;

/// Many / Medium / Few class groups (0-based class indices).
struct GroupSplit {
  std::vector<int> many;
  std::vector<int> medium;
  std::vector<int> few;

  int num_classes() const { return static_cast<int>(many.size() + medium.size() + few.size()); }
  /// "many", "medium" or "few".
  std::string group_of(int k) const;
};

/// Many = first ceil(K/3) classes, Medium = up to ceil(2K/3), Few = rest.
/// `counts` must be non-increasing. Throws ConfigError if K < 3.
GroupSplit group_split(std::span<const int> counts);

struct GroupMeans {
  double all = 0.0;
  double many = 0.0;
  double medium = 0.0;
  double few = 0.0;
};

/// Per-class values plus their group means. Classes excluded from a metric
/// (the target class for ASR) hold NaN and are skipped by the means.
struct ClassReport {
  std::vector<double> per_class;
  std::vector<int> samples;
  GroupMeans groups;
};

/// Recomputes group means from per-class values (NaN entries skipped).
GroupMeans group_means(std::span<const double> per_class, const GroupSplit& split);

/// Per-class clean accuracy. Throws DomainError if a class is absent.
ClassReport clean_accuracy_report(const BatchPredictor& predict, const data::Dataset& test,
                                  const GroupSplit& split, int batch_size = 256);

/// Fraction of triggered non-target test images predicted as `target`, per
/// source class. Throws DomainError if only target-class images exist.
ClassReport attack_success_report(const BatchPredictor& predict, const TriggerFn& trigger,
                                  const data::Dataset& test, int target, const GroupSplit& split,
                                  int batch_size = 256);

struct MetricsReport {
  int epoch = 0;
  int target_label = 0;
  std::string config_hash;
  ClassReport acc;
  ClassReport asr;
};

/// Rows = metric, columns = source group, prefixed by the target's group.
std::string report_csv(const MetricsReport& report, const GroupSplit& split,
                       const std::string& attack_name);

}  // namespace ltb::metrics
