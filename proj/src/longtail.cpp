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

#include "ltb/longtail.hpp"

#include <algorithm>
#include <cmath>

#include "ltb/errors.hpp"

namespace ltb::data {

CountProfile parse_profile(const std::string& name) {
  if (name == "exponential" || name == "exp") return CountProfile::kExponential;
  if (name == "step") return CountProfile::kStep;
  throw ConfigError("dataset.profile", "unknown profile '" + name + "'");
}

std::string profile_name(CountProfile p) {
  return p == CountProfile::kExponential ? "exponential" : "step";
}

std::vector<int> longtail_counts(int n_max, double imbalance_ratio, int num_classes,
                                 CountProfile profile) {
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("dataset.imbalance_ratio", "must be >= 1");
  if (num_classes < 1) throw ConfigError("dataset.classes", "must be >= 1");
  if (n_max < 1) throw ConfigError("dataset.n_max", "must be >= 1");
  std::vector<int> counts(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    double n;
    if (num_classes == 1) {
      n = n_max;
    } else if (profile == CountProfile::kExponential) {
      n = n_max * std::pow(imbalance_ratio, -static_cast<double>(k) / (num_classes - 1));
    } else {
      n = k < num_classes / 2 ? n_max : n_max / imbalance_ratio;
    }
    counts[static_cast<std::size_t>(k)] = std::max(1, static_cast<int>(std::lround(n)));
  }
  return counts;
}

LongTailDataset::LongTailDataset(Dataset data, std::vector<ClassProfile> profiles,
                                 double imbalance_ratio)
    : data_(std::move(data)),
      profiles_(std::move(profiles)),
      imbalance_ratio_(imbalance_ratio),
      by_class_(static_cast<std::size_t>(data_.num_classes)) {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    by_class_.at(static_cast<std::size_t>(data_.labels[i])).push_back(i);
  }
  for (std::size_t k = 1; k < profiles_.size(); ++k) {
    if (profiles_[k].count > profiles_[k - 1].count) {
      throw DomainError("LongTailDataset: class counts must be non-increasing");
    }
  }
  for (const auto& p : profiles_) {
    if (static_cast<int>(by_class_.at(static_cast<std::size_t>(p.class_index)).size()) != p.count) {
      throw DomainError("LongTailDataset: samples disagree with class profile");
    }
  }
}

std::vector<int> LongTailDataset::counts() const {
  std::vector<int> out;
  for (const auto& p : profiles_) out.push_back(p.count);
  return out;
}

double LongTailDataset::realised_imbalance_ratio() const {
  return static_cast<double>(profiles_.front().count) / profiles_.back().count;
}

std::vector<double> LongTailDataset::class_priors() const {
  std::vector<double> out;
  for (const auto& p : profiles_) out.push_back(static_cast<double>(p.count) / static_cast<double>(size()));
  return out;
}

LongTailDataset build_longtail(const Dataset& balanced, double imbalance_ratio, int num_classes,
                               CountProfile profile, int n_max) {
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("dataset.imbalance_ratio", "must be >= 1");
  if (num_classes < 1 || num_classes > balanced.num_classes) {
    throw ConfigError("dataset.classes", "source has " + std::to_string(balanced.num_classes) +
                                             " classes, requested " + std::to_string(num_classes));
  }
  const auto source_counts = balanced.class_counts();
  const int smallest = *std::min_element(source_counts.begin(), source_counts.begin() + num_classes);
  if (n_max <= 0) n_max = smallest;
  if (n_max > smallest) {
    throw ConfigError("dataset.n_max", "source has only " + std::to_string(smallest) +
                                           " samples in some class, need " + std::to_string(n_max));
  }
  const auto counts = longtail_counts(n_max, imbalance_ratio, num_classes, profile);
  Dataset out;
  out.num_classes = num_classes;
  out.source = balanced.source;
  std::vector<ClassProfile> profiles;
  for (int k = 0; k < num_classes; ++k) {
    const auto idx = balanced.indices_of(k);
    const int n = counts[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i) {
      out.images.push_back(balanced.images[idx[static_cast<std::size_t>(i)]]);
      out.labels.push_back(k);
    }
    profiles.push_back({k, n});
  }
  return LongTailDataset(std::move(out), std::move(profiles), imbalance_ratio);
}

bool PoisonPlan::contains(std::size_t index) const {
  return std::binary_search(poison_indices.begin(), poison_indices.end(), index);
}

std::vector<std::size_t> PoisonPlan::clean_indices(std::size_t dataset_size) const {
  std::vector<std::size_t> out;
  out.reserve(dataset_size - poison_indices.size());
  for (std::size_t i = 0; i < dataset_size; ++i) {
    if (!contains(i)) out.push_back(i);
  }
  return out;
}

std::vector<int> PoisonPlan::per_class(const LongTailDataset& ds) const {
  std::vector<int> out(static_cast<std::size_t>(ds.num_classes()), 0);
  for (std::size_t i : poison_indices) ++out[static_cast<std::size_t>(ds.label(i))];
  return out;
}

PoisonPlan select_poison_subset(const LongTailDataset& ds, double rate, int target_label, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("attack.poison_rate", "must lie in (0, 1)");
  if (target_label < 0 || target_label >= ds.num_classes()) {
    throw ConfigError("attack.target_label", "must be a valid class index");
  }
  const auto n = static_cast<std::size_t>(std::llround(rate * static_cast<double>(ds.size())));
  if (n < 1) throw ConfigError("attack.poison_rate", "poison subset would be empty");
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  // Partial Fisher-Yates: the first n entries form a uniform subset.
  for (std::size_t i = 0; i < n; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
  PoisonPlan plan;
  plan.poison_indices.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(plan.poison_indices.begin(), plan.poison_indices.end());
  plan.rate = rate;
  plan.target_label = target_label;
  return plan;
}

PoisonPlan empty_poison_plan(int target_label) {
  PoisonPlan plan;
  plan.target_label = target_label;
  return plan;
}

std::vector<std::size_t> sample_selector_set(const LongTailDataset& ds, int per_class_count, Rng& rng) {
  if (per_class_count < 1) throw ConfigError("selector.dt_per_class", "must be >= 1");
  std::vector<std::size_t> out;
  for (int k = 0; k < ds.num_classes(); ++k) {
    std::vector<std::size_t> idx = ds.class_indices(k);
    const std::size_t take = std::min(idx.size(), static_cast<std::size_t>(per_class_count));
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

}  // namespace ltb::data
