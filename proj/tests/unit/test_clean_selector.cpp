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

#include <set>

#include "helpers.hpp"
#include "ltb/clean_selector.hpp"
#include "ltb/dataset.hpp"
#include "ltb/errors.hpp"
#include "ltb/longtail.hpp"

using namespace ltb;
using namespace ltb::selectors;

namespace {

data::LongTailDataset small_lt() {
  data::SyntheticSpec s;
  s.num_classes = 3;
  s.per_class = 20;
  s.size = 8;
  s.seed = 3;
  return data::build_longtail(data::make_synthetic(s), 2, 3, data::CountProfile::kExponential);
}

augment::Registry reg8() {
  return augment::Registry::build(augment::Registry::default_operator_names(), 10).with_image_shape(3, 8, 8);
}

}  // namespace

TEST_CASE("update rule examples") {
  const StrengthSchedule s(1, 10, 0.6);
  auto up = [&](int start, double acc, double gamma) {
    StrengthSchedule sc = StrengthSchedule::restore(10, gamma, {{start}});
    sc.update(std::vector<double>{acc});
    return sc.score(0);
  };
  CHECK(up(3, 0.7, 0.6) == 4);
  CHECK(up(0, 0.2, 0.6) == 0);
  CHECK(up(10, 1.0, 0.6) == 10);
  CHECK(up(5, 0.6, 0.6) == 4);  // strict >
  CHECK(s.score(0) == 0);
}

TEST_CASE("update rule on an exhaustive grid") {
  const int s_max = 10;
  for (int s0 = 0; s0 <= s_max; ++s0) {
    for (int ai = 0; ai <= 20; ++ai) {
      for (int gi = 0; gi <= 10; ++gi) {
        const double acc = ai / 20.0, gamma = gi / 10.0;
        StrengthSchedule sc = StrengthSchedule::restore(s_max, gamma, {{s0}});
        sc.update(std::vector<double>{acc});
        const int expect = std::clamp(acc > gamma ? s0 + 1 : s0 - 1, 0, s_max);
        REQUIRE(sc.score(0) == expect);
        REQUIRE(std::abs(sc.score(0) - s0) <= 1);
      }
    }
  }
}

TEST_CASE("schedule history and functional update") {
  StrengthSchedule s(3, 4, 0.5);
  s.update(std::vector<double>{0.9, 0.1, 0.9});
  s.update(std::vector<double>{0.9, 0.9, 0.1});
  REQUIRE(s.history().size() == 3);
  CHECK(s.history()[0] == std::vector<int>{0, 0, 0});
  CHECK(s.history()[2] == std::vector<int>{2, 1, 0});
  CHECK(s.epoch() == 2);
  const auto t = update_strengths(s, std::vector<double>{1, 1, 1}, 0.5);
  CHECK(t.scores() == std::vector<int>{3, 2, 1});
  CHECK(s.scores() == std::vector<int>{2, 1, 0});
  CHECK_THROWS_AS(s.update(std::vector<double>{1.0}), DomainError);
  const auto r = StrengthSchedule::restore(4, 0.5, s.history());
  CHECK(r.scores() == s.scores());
  CHECK(r.epoch() == 2);
}

TEST_CASE("monotone response to accuracy") {
  Rng r(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int s0 = static_cast<int>(r.below(11));
    const double a = r.uniform(), b = r.uniform(), g = r.uniform();
    auto next = [&](double acc) {
      auto sc = StrengthSchedule::restore(10, g, {{s0}});
      sc.update(std::vector<double>{acc});
      return sc.score(0);
    };
    REQUIRE((a <= b ? next(a) <= next(b) : next(a) >= next(b)));
  }
}

TEST_CASE("choose_clean_ops draws s(k) distinct ops at strength s(k)") {
  const auto reg = reg8();
  Rng r(2);
  auto sc = StrengthSchedule::restore(10, 0.6, {{0, 2, 10}});
  CHECK(choose_clean_ops(sc, 0, reg, r).empty());
  const auto two = choose_clean_ops(sc, 1, reg, r);
  REQUIRE(two.size() == 2);
  CHECK(two[0].operator_id != two[1].operator_id);
  for (const auto& op : two) CHECK(op.strength == 2);
  const auto ten = choose_clean_ops(sc, 2, reg, r);
  CHECK(ten.size() == 10);
  std::set<int> ids;
  for (const auto& op : ten) ids.insert(op.operator_id);
  CHECK(ids.size() == 10);
}

TEST_CASE("choose_clean_ops with more ops than operators repeats only the excess") {
  const auto reg = augment::Registry::build({"rotate", "brightness", "contrast"}, 5).with_image_shape(3, 8, 8);
  Rng r(3);
  auto sc = StrengthSchedule::restore(5, 0.6, {{5}});
  const auto ops = choose_clean_ops(sc, 0, reg, r);
  REQUIRE(ops.size() == 5);
  std::set<int> first3;
  for (int i = 0; i < 3; ++i) first3.insert(ops[i].operator_id);
  CHECK(first3.size() == 3);
}

TEST_CASE("choose_clean_ops frequencies are uniform (3/14)") {
  const auto reg = reg8();
  Rng r(4);
  auto sc = StrengthSchedule::restore(10, 0.6, {{3}});
  std::vector<int> hist(14, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    for (const auto& op : choose_clean_ops(sc, 0, reg, r)) ++hist[op.operator_id];
  }
  const double p = 3.0 / 14;
  const double sd = std::sqrt(n * p * (1 - p));
  for (int h : hist) CHECK(std::abs(h - n * p) < 4.5 * sd);
}

TEST_CASE("evaluate_class_accuracy with oracle and constant predictors") {
  const auto lt = small_lt();
  const auto reg = reg8();
  Rng r(5);
  const auto dt = data::sample_selector_set(lt, 5, r);
  std::vector<int> dt_labels;
  for (auto i : dt) dt_labels.push_back(lt.label(i));

  // Oracle: recognise each image by exact match against D_t (augmented
  // images differ, so map by position in the batch instead).
  std::size_t cursor = 0;
  const BatchPredictor oracle = [&](const Tensor& x) {
    std::vector<int> out;
    for (int i = 0; i < x.n(); ++i) out.push_back(dt_labels[cursor++]);
    return out;
  };
  auto sc = StrengthSchedule::restore(10, 0.6, {{3, 5, 1}});
  CHECK(evaluate_class_accuracy(oracle, lt, dt, sc, reg, r) == std::vector<double>{1, 1, 1});

  const BatchPredictor constant = [](const Tensor& x) { return std::vector<int>(static_cast<std::size_t>(x.n()), 1); };
  StrengthSchedule zero(3, 10, 0.6);
  CHECK(evaluate_class_accuracy(constant, lt, dt, zero, reg, r) == std::vector<double>{0, 1, 0});

  std::vector<std::size_t> missing(dt.begin(), dt.begin() + 5);  // class 0 only
  CHECK_THROWS_AS(evaluate_class_accuracy(constant, lt, missing, zero, reg, r), DomainError);
}

TEST_CASE("zero schedule scores unaugmented images exactly") {
  const auto lt = small_lt();
  const auto reg = reg8();
  Rng r(6);
  const auto dt = data::sample_selector_set(lt, 4, r);
  std::vector<Tensor> seen;
  const BatchPredictor record = [&](const Tensor& x) {
    seen.push_back(x);
    return std::vector<int>(static_cast<std::size_t>(x.n()), 0);
  };
  StrengthSchedule zero(3, 10, 0.6);
  evaluate_class_accuracy(record, lt, dt, zero, reg, r);
  std::vector<const Image*> raw;
  for (auto i : dt) raw.push_back(&lt.image(i));
  const Tensor expect = stack_images(raw);
  Tensor all = seen.size() == 1 ? seen[0] : concat([&] {
    std::vector<const Tensor*> p;
    for (auto& t : seen) p.push_back(&t);
    return p;
  }());
  CHECK(all.values() == expect.values());
}
