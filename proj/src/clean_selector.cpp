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

#include "ltb/clean_selector.hpp"

#include <algorithm>

#include "ltb/errors.hpp"

namespace ltb::selectors {

StrengthSchedule::StrengthSchedule(int num_classes, int s_max, double gamma, int initial)
    : scores_(static_cast<std::size_t>(num_classes), std::clamp(initial, 0, s_max)),
      s_max_(s_max),
      gamma_(gamma) {
  if (num_classes < 1) throw ConfigError("dataset.classes", "must be >= 1");
  if (s_max < 1) throw ConfigError("augment.s_max", "must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("selector.gamma", "must lie in [0, 1]");
  history_.push_back(scores_);
}

void StrengthSchedule::update(std::span<const double> acc) {
  if (acc.size() != scores_.size()) {
    throw DomainError("update_strengths: expected " + std::to_string(scores_.size()) +
                      " accuracies, got " + std::to_string(acc.size()));
  }
  for (std::size_t k = 0; k < scores_.size(); ++k) {
    const int step = acc[k] > gamma_ ? 1 : -1;
    scores_[k] = std::clamp(scores_[k] + step, 0, s_max_);
  }
  ++epoch_;
  history_.push_back(scores_);
}

StrengthSchedule StrengthSchedule::restore(int s_max, double gamma,
                                           std::vector<std::vector<int>> history) {
  if (history.empty()) throw DomainError("StrengthSchedule::restore: empty history");
  StrengthSchedule s(static_cast<int>(history.front().size()), s_max, gamma);
  s.scores_ = history.back();
  s.epoch_ = static_cast<int>(history.size()) - 1;
  s.history_ = std::move(history);
  return s;
}

StrengthSchedule update_strengths(StrengthSchedule schedule, std::span<const double> acc, double gamma) {
  StrengthSchedule out = StrengthSchedule::restore(schedule.s_max(), gamma, schedule.history());
  out.update(acc);
  return out;
}

std::vector<augment::AugOperation> choose_clean_ops(const StrengthSchedule& schedule, int k,
                                                    const augment::Registry& registry, Rng& rng) {
  if (k < 0 || k >= schedule.num_classes()) throw DomainError("choose_clean_ops: bad class index");
  const int s = schedule.score(k);
  if (s == 0) return {};
  auto slice = registry.operations_at_strength(s).operations;
  const std::size_t n = static_cast<std::size_t>(s);
  std::vector<augment::AugOperation> out;
  const std::size_t distinct = std::min(n, slice.size());
  for (std::size_t i = 0; i < distinct; ++i) {
    std::swap(slice[i], slice[i + rng.below(slice.size() - i)]);
    out.push_back(slice[i]);
  }
  while (out.size() < n) out.push_back(slice[rng.below(slice.size())]);
  return out;
}

std::vector<double> evaluate_class_accuracy(const BatchPredictor& predict,
                                            const data::LongTailDataset& ds,
                                            std::span<const std::size_t> selector_set,
                                            const StrengthSchedule& schedule,
                                            const augment::Registry& registry, Rng& rng) {
  const int K = ds.num_classes();
  std::vector<int> total(static_cast<std::size_t>(K), 0), correct(static_cast<std::size_t>(K), 0);
  std::vector<Image> batch;
  std::vector<int> labels;
  batch.reserve(selector_set.size());
  for (std::size_t idx : selector_set) {
    const int y = ds.label(idx);
    const auto ops = choose_clean_ops(schedule, y, registry, rng);
    batch.push_back(augment::apply_pipeline(registry, ops, ds.image(idx), rng));
    labels.push_back(y);
    ++total[static_cast<std::size_t>(y)];
  }
  for (int k = 0; k < K; ++k) {
    if (total[static_cast<std::size_t>(k)] == 0) {
      throw DomainError("evaluate_class_accuracy: class " + std::to_string(k) +
                        " has no sample in the selector set");
    }
  }
  const auto pred = predict(stack_images(std::span<const Image>(batch)));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred[i] == labels[i]) ++correct[static_cast<std::size_t>(labels[i])];
  }
  std::vector<double> acc(static_cast<std::size_t>(K));
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = static_cast<double>(correct[k]) / total[k];
  return acc;
}

}  // namespace ltb::selectors
