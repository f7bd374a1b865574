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

#include <cstddef>
#include <vector>

#include "ltb/dataset.hpp"
#include "ltb/rng.hpp"

namespace ltb::data {

enum class CountProfile {
  kExponential,  // n_k = N_max * IR^(-k/(K-1))
  kStep,         // first half N_max, second half N_max / IR
};

CountProfile parse_profile(const std::string& name);
std::string profile_name(CountProfile p);

struct ClassProfile {
  int class_index = 0;
  int count = 0;
};

/// Per-class counts for a long-tailed subset. Counts are non-increasing.
std::vector<int> longtail_counts(int n_max, double imbalance_ratio, int num_classes,
                                 CountProfile profile = CountProfile::kExponential);

/// Long-tailed training set. Class 0 is the largest class.
class LongTailDataset {
 public:
  LongTailDataset(Dataset data, std::vector<ClassProfile> profiles, double imbalance_ratio);

  const Dataset& data() const { return data_; }
  const Image& image(std::size_t i) const { return data_.images[i]; }
  int label(std::size_t i) const { return data_.labels[i]; }
  std::size_t size() const { return data_.size(); }
  int num_classes() const { return data_.num_classes; }
  const std::vector<ClassProfile>& profiles() const { return profiles_; }
  std::vector<int> counts() const;
  /// Configured imbalance ratio.
  double imbalance_ratio() const { return imbalance_ratio_; }
  /// n_1 / n_K of the realised counts.
  double realised_imbalance_ratio() const;
  const std::vector<std::size_t>& class_indices(int k) const { return by_class_[static_cast<std::size_t>(k)]; }
  /// Empirical class priors n_k / |D|.
  std::vector<double> class_priors() const;

 private:
  Dataset data_;
  std::vector<ClassProfile> profiles_;
  double imbalance_ratio_;
  std::vector<std::vector<std::size_t>> by_class_;
};

/// Takes the first n_k samples of each of the first `num_classes` classes of
/// a balanced source. `n_max` <= 0 means "per-class count of the smallest
/// source class". Throws ConfigError if IR < 1 or the source is too small.
LongTailDataset build_longtail(const Dataset& balanced, double imbalance_ratio, int num_classes,
                               CountProfile profile = CountProfile::kExponential, int n_max = 0);

/// Poisoned subset with an all-to-one label map.
struct PoisonPlan {
  std::vector<std::size_t> poison_indices;  // sorted
  double rate = 0.0;
  int target_label = 0;

  /// All-to-one label map.
  int eta(int /*label*/) const { return target_label; }
  bool empty() const { return poison_indices.empty(); }
  bool contains(std::size_t index) const;
  /// Complement of the poison set, sorted.
  std::vector<std::size_t> clean_indices(std::size_t dataset_size) const;
  /// Poison count per source class.
  std::vector<int> per_class(const LongTailDataset& ds) const;
};

/// Uniform sample without replacement of round(rate * |D|) indices.
/// Throws ConfigError unless 0 < rate < 1, the target is a valid class and
/// the rounded size is at least 1.
PoisonPlan select_poison_subset(const LongTailDataset& ds, double rate, int target_label, Rng& rng);

/// Plan that poisons nothing (clean control runs).
PoisonPlan empty_poison_plan(int target_label);

/// min(c, n_k) indices from each class, grouped by class in ascending order.
/// Throws ConfigError if c < 1.
std::vector<std::size_t> sample_selector_set(const LongTailDataset& ds, int per_class_count, Rng& rng);

}  // namespace ltb::data
