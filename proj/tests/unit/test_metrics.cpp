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

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ltb/errors.hpp"
#include "ltb/metrics.hpp"

using namespace ltb;
using namespace ltb::metrics;

namespace {

// Label is written into the first pixel so predictors can cheat.
data::Dataset labelled_set(int K, int per_class) {
  data::Dataset d;
  d.num_classes = K;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < per_class; ++i) {
      Image im(1, 2, 2, 0.0);
      im.at(0, 0, 0) = k;
      im.at(0, 1, 1) = i;
      d.images.push_back(im);
      d.labels.push_back(k);
    }
  }
  return d;
}

std::vector<int> descending(int K) {
  std::vector<int> c;
  for (int k = 0; k < K; ++k) c.push_back(1000 - k);
  return c;
}

std::vector<int> read_label(const Tensor& x) {
  std::vector<int> out;
  for (int i = 0; i < x.n(); ++i) out.push_back(static_cast<int>(std::lround(x.sample(i)[0])));
  return out;
}

const TriggerFn identity_trigger = [](const Tensor& x) { return x; };

}  // namespace

TEST_CASE("group split sizes") {
  const auto sizes = [](int K) {
    const auto c = descending(K);
    const auto s = group_split(c);
    return std::vector<std::size_t>{s.many.size(), s.medium.size(), s.few.size()};
  };
  CHECK(sizes(9) == std::vector<std::size_t>{3, 3, 3});
  CHECK(sizes(10) == std::vector<std::size_t>{4, 3, 3});
  CHECK(sizes(100) == std::vector<std::size_t>{34, 33, 33});
  CHECK(sizes(3) == std::vector<std::size_t>{1, 1, 1});
  CHECK_THROWS_AS(group_split(descending(2)), ConfigError);
  const std::vector<int> unsorted{5, 9, 1};
  CHECK_THROWS(group_split(unsorted));
}

TEST_CASE("group split partitions the classes in order") {
  for (int K = 3; K <= 40; ++K) {
    const auto c = descending(K);
    const auto s = group_split(c);
    std::vector<int> all;
    for (const auto* g : {&s.many, &s.medium, &s.few}) all.insert(all.end(), g->begin(), g->end());
    REQUIRE(static_cast<int>(all.size()) == K);
    for (int k = 0; k < K; ++k) REQUIRE(all[static_cast<std::size_t>(k)] == k);
    CHECK(s.group_of(0) == "many");
    CHECK(s.group_of(K - 1) == "few");
  }
}

TEST_CASE("clean accuracy: oracle and constant predictors") {
  const auto test = labelled_set(10, 7);
  const auto split = group_split(descending(10));
  const auto oracle = clean_accuracy_report(read_label, test, split, 16);
  for (double a : oracle.per_class) CHECK(a == 1.0);
  CHECK(oracle.groups.all == 1.0);

  const BatchPredictor constant = [](const Tensor& x) { return std::vector<int>(static_cast<std::size_t>(x.n()), 3); };
  const auto c = clean_accuracy_report(constant, test, split);
  CHECK(c.groups.all == doctest::Approx(0.1));
  CHECK(c.groups.many == doctest::Approx(0.25));
  CHECK(c.groups.medium == doctest::Approx(0.0));
  CHECK(c.samples == std::vector<int>(10, 7));

  auto missing = test;
  missing.images.resize(63);
  missing.labels.resize(63);
  CHECK_THROWS_AS(clean_accuracy_report(read_label, missing, split), DomainError);
}

TEST_CASE("group means recompute from per-class values") {
  Rng rng(3);
  const auto split = group_split(descending(10));
  const BatchPredictor noisy = [&](const Tensor& x) {
    auto y = read_label(x);
    for (int& v : y) {
      if (rng.coin(0.4)) v = static_cast<int>(rng.below(10));
    }
    return y;
  };
  const auto r = clean_accuracy_report(noisy, labelled_set(10, 13), split);
  const auto g = group_means(r.per_class, split);
  double many = 0, all = 0;
  for (int k : split.many) many += r.per_class[static_cast<std::size_t>(k)];
  for (double v : r.per_class) all += v;
  CHECK(std::abs(g.many - many / split.many.size()) < 1e-9);
  CHECK(std::abs(g.all - all / 10) < 1e-9);
  CHECK(std::abs(r.groups.few - g.few) < 1e-12);
  CHECK(std::abs(r.groups.medium - g.medium) < 1e-12);
}

TEST_CASE("attack success: constant target predictor and target exclusion") {
  const auto test = labelled_set(10, 5);
  const auto split = group_split(descending(10));
  const BatchPredictor always4 = [](const Tensor& x) { return std::vector<int>(static_cast<std::size_t>(x.n()), 4); };
  const auto r = attack_success_report(always4, identity_trigger, test, 4, split);
  CHECK(std::isnan(r.per_class[4]));
  CHECK(r.samples[4] == 0);
  for (int k = 0; k < 10; ++k) {
    if (k != 4) CHECK(r.per_class[static_cast<std::size_t>(k)] == 1.0);
  }
  CHECK(r.groups.all == 1.0);
  CHECK(r.groups.medium == 1.0);

  // Oracle never predicts the target on non-target images.
  const auto o = attack_success_report(read_label, identity_trigger, test, 0, split);
  CHECK(o.groups.all == 0.0);

  // Trigger is applied before prediction: a trigger that writes label 2.
  const TriggerFn to2 = [](const Tensor& x) {
    Tensor y = x;
    for (int i = 0; i < y.n(); ++i) y.sample(i)[0] = 2.0;
    return y;
  };
  CHECK(attack_success_report(read_label, to2, test, 2, split).groups.all == 1.0);

  data::Dataset only_target;
  only_target.num_classes = 10;
  for (int i = 0; i < 3; ++i) {
    only_target.images.push_back(test.images[0]);
    only_target.labels.push_back(0);
  }
  CHECK_THROWS_AS(attack_success_report(always4, identity_trigger, only_target, 0, split), DomainError);
}

TEST_CASE("random guessing gives chance-level attack success (Monte Carlo)") {
  Rng rng(5);
  const BatchPredictor guess = [&](const Tensor& x) {
    std::vector<int> y;
    for (int i = 0; i < x.n(); ++i) y.push_back(static_cast<int>(rng.below(10)));
    return y;
  };
  const auto test = labelled_set(10, 400);
  const auto r = attack_success_report(guess, identity_trigger, test, 0, group_split(descending(10)));
  // 3600 Bernoulli(0.1) draws: sd = 0.005.
  CHECK(std::abs(r.groups.all - 0.1) < 0.025);
}

TEST_CASE("report csv layout") {
  const auto split = group_split(descending(10));
  MetricsReport rep;
  rep.target_label = 0;
  rep.config_hash = "abc123";
  rep.acc.groups = {0.9, 0.95, 0.9, 0.8};
  rep.asr.groups = {0.5, 0.6, 0.5, 0.4};
  const auto csv = report_csv(rep, split, "ltb");
  CHECK(csv.rfind("metric,attack,target_label,target_group,Many,Medium,Few,All,config_hash\n", 0) == 0);
  CHECK(csv.find("ACC,ltb,0,many,") != std::string::npos);
  CHECK(csv.find("ASR,ltb,0,many,") != std::string::npos);
  CHECK(csv.find("abc123") != std::string::npos);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 3);
}
