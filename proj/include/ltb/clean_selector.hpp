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
#include <vector>

#include "ltb/augment.hpp"
#include "ltb/longtail.hpp"

namespace ltb::selectors {

/// Maps a batch of images [N, C, H, W] to predicted class indices.
using BatchPredictor = std::function<std::vector<int>(const Tensor&)>;

/// Per-class augmentation strength scores s(k) with their update history.
class StrengthSchedule {
 public:
  StrengthSchedule() = default;
  /// All scores start at `initial` (0 by default: train unaugmented first).
  StrengthSchedule(int num_classes, int s_max, double gamma, int initial = 0);

  int num_classes() const { return static_cast<int>(scores_.size()); }
  int s_max() const { return s_max_; }
  double gamma() const { return gamma_; }
  int epoch() const { return epoch_; }
  int score(int k) const { return scores_.at(static_cast<std::size_t>(k)); }
  const std::vector<int>& scores() const { return scores_; }
  /// history()[t] is the score vector after t updates; history()[0] is the initial state.
  const std::vector<std::vector<int>>& history() const { return history_; }

  /// s(k) += 1 where acc(k) > gamma, else s(k) -= 1; clamped to [0, s_max].
  void update(std::span<const double> acc);

  /// Rebuilds a schedule from serialized history (checkpoint restore).
  static StrengthSchedule restore(int s_max, double gamma, std::vector<std::vector<int>> history);

 private:
  std::vector<int> scores_;
  int s_max_ = 0;
  double gamma_ = 0.6;
  int epoch_ = 0;
  std::vector<std::vector<int>> history_;
};

/// Functional form of StrengthSchedule::update with an explicit threshold.
StrengthSchedule update_strengths(StrengthSchedule schedule, std::span<const double> acc, double gamma);

/// n(k) = s(k) operations at strength s(k): distinct uniform picks while
/// s(k) <= N, then with replacement for the excess. Empty when s(k) = 0.
std::vector<augment::AugOperation> choose_clean_ops(const StrengthSchedule& schedule, int k,
                                                    const augment::Registry& registry, Rng& rng);

/// Per-class accuracy on the selector set, each image first augmented by
/// choose_clean_ops at the current strength of its class. Throws DomainError
/// if some class has no sample in `selector_set`.
std::vector<double> evaluate_class_accuracy(const BatchPredictor& predict,
                                            const data::LongTailDataset& ds,
                                            std::span<const std::size_t> selector_set,
                                            const StrengthSchedule& schedule,
                                            const augment::Registry& registry, Rng& rng);

}  // namespace ltb::selectors
