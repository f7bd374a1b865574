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

#include "ltb/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ltb/errors.hpp"

namespace ltb::metrics {

namespace {

double mean_of(std::span<const double> per_class, const std::vector<int>& members) {
  double s = 0.0;
  int n = 0;
  for (int k : members) {
    const double v = per_class[static_cast<std::size_t>(k)];
    if (std::isnan(v)) continue;
    s += v;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / n;
}

template <typename Fn>
void for_each_batch(const data::Dataset& ds, const std::vector<std::size_t>& idx, int batch_size, Fn fn) {
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> ims;
    for (std::size_t i = start; i < end; ++i) ims.push_back(&ds.images[idx[i]]);
    fn(start, end, stack_images(ims));
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

std::string GroupSplit::group_of(int k) const {
  for (int m : many) {
    if (m == k) return "many";
  }
  for (int m : medium) {
    if (m == k) return "medium";
  }
  return "few";
}

GroupSplit group_split(std::span<const int> counts) {
  const int K = static_cast<int>(counts.size());
  if (K < 3) throw ConfigError("dataset.classes", "group split needs at least 3 classes");
  for (int k = 1; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] > counts[static_cast<std::size_t>(k - 1)]) {
      throw DomainError("group_split: counts must be sorted in descending order");
    }
  }
  const int a = (K + 2) / 3;
  const int b = (2 * K + 2) / 3;
  GroupSplit s;
  for (int k = 0; k < K; ++k) {
    if (k < a) {
      s.many.push_back(k);
    } else if (k < b) {
      s.medium.push_back(k);
    } else {
      s.few.push_back(k);
    }
  }
  return s;
}

GroupMeans group_means(std::span<const double> per_class, const GroupSplit& split) {
  std::vector<int> all;
  for (int k = 0; k < static_cast<int>(per_class.size()); ++k) all.push_back(k);
  return {mean_of(per_class, all), mean_of(per_class, split.many), mean_of(per_class, split.medium),
          mean_of(per_class, split.few)};
}

ClassReport clean_accuracy_report(const BatchPredictor& predict, const data::Dataset& test,
                                  const GroupSplit& split, int batch_size) {
  const int K = split.num_classes();
  std::vector<int> total(static_cast<std::size_t>(K), 0), correct(static_cast<std::size_t>(K), 0);
  std::vector<std::size_t> idx(test.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for_each_batch(test, idx, batch_size, [&](std::size_t start, std::size_t end, const Tensor& x) {
    const auto pred = predict(x);
    for (std::size_t i = start; i < end; ++i) {
      const int y = test.labels[i];
      if (y < 0 || y >= K) throw DomainError("clean_accuracy_report: label outside the class split");
      ++total[static_cast<std::size_t>(y)];
      if (pred[i - start] == y) ++correct[static_cast<std::size_t>(y)];
    }
  });
  ClassReport r;
  for (int k = 0; k < K; ++k) {
    if (total[static_cast<std::size_t>(k)] == 0) {
      throw DomainError("clean_accuracy_report: class " + std::to_string(k) + " absent from test set");
    }
    r.per_class.push_back(static_cast<double>(correct[static_cast<std::size_t>(k)]) / total[static_cast<std::size_t>(k)]);
    r.samples.push_back(total[static_cast<std::size_t>(k)]);
  }
  r.groups = group_means(r.per_class, split);
  return r;
}

ClassReport attack_success_report(const BatchPredictor& predict, const TriggerFn& trigger,
                                  const data::Dataset& test, int target, const GroupSplit& split,
                                  int batch_size) {
  const int K = split.num_classes();
  if (target < 0 || target >= K) throw DomainError("attack_success_report: bad target label");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] != target) idx.push_back(i);
  }
  if (idx.empty()) throw DomainError("attack_success_report: no non-target test images");
  std::vector<int> total(static_cast<std::size_t>(K), 0), hits(static_cast<std::size_t>(K), 0);
  for_each_batch(test, idx, batch_size, [&](std::size_t start, std::size_t end, const Tensor& x) {
    const auto pred = predict(trigger(x));
    for (std::size_t i = start; i < end; ++i) {
      const int y = test.labels[idx[i]];
      ++total[static_cast<std::size_t>(y)];
      if (pred[i - start] == target) ++hits[static_cast<std::size_t>(y)];
    }
  });
  ClassReport r;
  for (int k = 0; k < K; ++k) {
    const int n = total[static_cast<std::size_t>(k)];
    r.per_class.push_back(n == 0 ? std::numeric_limits<double>::quiet_NaN()
                                 : static_cast<double>(hits[static_cast<std::size_t>(k)]) / n);
    r.samples.push_back(n);
  }
  r.groups = group_means(r.per_class, split);
  return r;
}

std::string report_csv(const MetricsReport& report, const GroupSplit& split,
                       const std::string& attack_name) {
  const std::string tg = split.group_of(report.target_label);
  std::ostringstream os;
  os << "metric,attack,target_label,target_group,Many,Medium,Few,All,config_hash\n";
  const auto row = [&](const char* metric, const GroupMeans& g) {
    os << metric << ',' << attack_name << ',' << report.target_label << ',' << tg << ',' << fmt(g.many)
       << ',' << fmt(g.medium) << ',' << fmt(g.few) << ',' << fmt(g.all) << ',' << report.config_hash
       << '\n';
  };
  row("ACC", report.acc.groups);
  row("ASR", report.asr.groups);
  return os.str();
}

}  // namespace ltb::metrics
