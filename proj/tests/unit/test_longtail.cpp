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

#include <fstream>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "ltb/dataset.hpp"
#include "ltb/errors.hpp"
#include "ltb/longtail.hpp"

using namespace ltb;
using namespace ltb::data;

namespace {

Dataset balanced(int classes, int per_class, int size = 8) {
  SyntheticSpec s;
  s.num_classes = classes;
  s.per_class = per_class;
  s.size = size;
  s.seed = 17;
  return make_synthetic(s);
}

}  // namespace

TEST_CASE("exponential profile counts") {
  CHECK(longtail_counts(100, 4, 3) == std::vector<int>{100, 50, 25});
  const auto c = longtail_counts(5000, 50, 10);
  CHECK(c.front() == 5000);
  CHECK(c.back() == 100);
  CHECK(longtail_counts(30, 1, 4) == std::vector<int>{30, 30, 30, 30});
  CHECK(longtail_counts(500, 50, 10) == std::vector<int>{500, 324, 210, 136, 88, 57, 37, 24, 15, 10});
}

TEST_CASE("step profile counts") {
  const auto c = longtail_counts(100, 10, 4, CountProfile::kStep);
  CHECK(c == std::vector<int>{100, 100, 10, 10});
}

TEST_CASE("profile counts are non-increasing with IR within one sample") {
  Rng r(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + static_cast<int>(r.below(30));
    const int n_max = 10 + static_cast<int>(r.below(1000));
    const double ir = r.uniform(1, 100);
    const auto c = longtail_counts(n_max, ir, K);
    REQUIRE(c.front() == n_max);
    for (int k = 1; k < K; ++k) REQUIRE(c[k] <= c[k - 1]);
    REQUIRE(std::abs(c.back() - n_max / ir) <= 1.0);
  }
}

TEST_CASE("build_longtail takes exact per-class counts") {
  const auto src = balanced(3, 100);
  const auto lt = build_longtail(src, 4, 3, CountProfile::kExponential);
  CHECK(lt.counts() == std::vector<int>{100, 50, 25});
  CHECK(lt.size() == 175);
  CHECK(lt.realised_imbalance_ratio() == doctest::Approx(4.0));
  for (int k = 0; k < 3; ++k) {
    for (auto i : lt.class_indices(k)) CHECK(lt.label(i) == k);
  }
  const auto pri = lt.class_priors();
  CHECK(std::accumulate(pri.begin(), pri.end(), 0.0) == doctest::Approx(1.0));
  CHECK(pri[0] == doctest::Approx(100.0 / 175));
}

TEST_CASE("build_longtail errors") {
  const auto src = balanced(3, 20);
  CHECK_THROWS_AS(build_longtail(src, 0.5, 3, CountProfile::kExponential), ConfigError);
  CHECK_THROWS_AS(build_longtail(src, 2, 3, CountProfile::kExponential, 50), ConfigError);
  CHECK_THROWS_AS(build_longtail(src, 2, 4, CountProfile::kExponential), ConfigError);
}

TEST_CASE("poison subset size, determinism and all-to-one map") {
  const auto lt = build_longtail(balanced(3, 100), 4, 3, CountProfile::kExponential);
  Rng a(5), b(5);
  const auto p = select_poison_subset(lt, 0.1, 2, a);
  const auto q = select_poison_subset(lt, 0.1, 2, b);
  CHECK(p.poison_indices == q.poison_indices);
  CHECK(p.poison_indices.size() == 18);  // round(17.5)
  CHECK(std::set<std::size_t>(p.poison_indices.begin(), p.poison_indices.end()).size() == 18);
  for (int y = 0; y < 3; ++y) CHECK(p.eta(y) == 2);
  const auto clean = p.clean_indices(lt.size());
  CHECK(clean.size() == 175 - 18);
  for (auto i : clean) CHECK_FALSE(p.contains(i));
}

TEST_CASE("poison subset arithmetic on a 5000-sample set") {
  Dataset d;
  d.num_classes = 2;
  for (int i = 0; i < 5000; ++i) {
    d.images.emplace_back(1, 1, 1, 0.0);
    d.labels.push_back(i < 2500 ? 0 : 1);
  }
  const auto lt = build_longtail(d, 1, 2, CountProfile::kExponential);
  Rng r(1);
  CHECK(select_poison_subset(lt, 0.1, 0, r).poison_indices.size() == 500);
}

TEST_CASE("poison subset errors") {
  const auto lt = build_longtail(balanced(3, 4), 1, 3, CountProfile::kExponential);
  Rng r(1);
  CHECK_THROWS_AS(select_poison_subset(lt, 0.01, 0, r), ConfigError);  // rho * |D| < 1
  CHECK_THROWS_AS(select_poison_subset(lt, 0.0, 0, r), ConfigError);
  CHECK_THROWS_AS(select_poison_subset(lt, 1.0, 0, r), ConfigError);
  CHECK_THROWS_AS(select_poison_subset(lt, 0.5, 3, r), ConfigError);
}

TEST_CASE("poison selection is proportional to class size (chi-square)") {
  const auto lt = build_longtail(balanced(3, 100), 4, 3, CountProfile::kExponential);
  std::vector<double> totals(3, 0.0);
  const int draws = 1000;
  for (int t = 0; t < draws; ++t) {
    Rng r(derive_seed(1234, static_cast<std::uint64_t>(t)));
    const auto plan = select_poison_subset(lt, 0.1, 0, r);
    const auto pc = plan.per_class(lt);
    for (int k = 0; k < 3; ++k) totals[k] += pc[k];
  }
  const double n = std::accumulate(totals.begin(), totals.end(), 0.0);
  const std::vector<double> share{100.0 / 175, 50.0 / 175, 25.0 / 175};
  double chi2 = 0;
  for (int k = 0; k < 3; ++k) {
    const double e = n * share[k];
    chi2 += (totals[k] - e) * (totals[k] - e) / e;
  }
  // 2 degrees of freedom, p = 0.001
  CHECK(chi2 < 13.82);
  CHECK(totals[0] / draws == doctest::Approx(18 * share[0]).epsilon(0.05));
}

TEST_CASE("selector set clamps to class size") {
  const auto lt = build_longtail(balanced(3, 100), 4, 3, CountProfile::kExponential);
  auto sizes = [&](int c) {
    Rng r(3);
    const auto dt = sample_selector_set(lt, c, r);
    std::vector<int> s(3, 0);
    for (auto i : dt) ++s[lt.label(i)];
    return s;
  };
  CHECK(sizes(10) == std::vector<int>{10, 10, 10});
  CHECK(sizes(30) == std::vector<int>{30, 30, 25});
  Rng a(9), b(9);
  CHECK(sample_selector_set(lt, 10, a) == sample_selector_set(lt, 10, b));
}

TEST_CASE("packed dataset round trip") {
  testing::TempDir tmp("packed");
  std::filesystem::create_directories(tmp.path);
  const auto src = balanced(3, 5, 8);
  save_packed(src, tmp.path / "d.bin");
  const auto back = load_packed(tmp.path / "d.bin");
  CHECK(back.num_classes == 3);
  CHECK(back.labels == src.labels);
  REQUIRE(back.images.size() == src.images.size());
  for (std::size_t i = 0; i < src.images.size(); ++i) {
    for (std::size_t j = 0; j < src.images[i].size(); ++j) {
      REQUIRE(std::abs(back.images[i].values()[j] - src.images[i].values()[j]) <= 0.5 / 255 + 1e-12);
    }
  }
  {
    std::ofstream bad(tmp.path / "bad.bin", std::ios::binary);
    bad << "nope";
  }
  CHECK_THROWS(load_packed(tmp.path / "bad.bin"));
}

TEST_CASE("folder dataset loads per-class subfolders") {
  testing::TempDir tmp("folder");
  const auto src = balanced(2, 3, 8);
  for (std::size_t i = 0; i < src.images.size(); ++i) {
    const auto dir = tmp.path / ("class" + std::to_string(src.labels[i]));
    std::filesystem::create_directories(dir);
    write_png(src.images[i], dir / (std::to_string(i) + ".png"));
  }
  const auto ds = load_folder(tmp.path, 3);
  CHECK(ds.num_classes == 2);
  CHECK(ds.size() == 6);
  CHECK(ds.class_counts() == std::vector<int>{3, 3});
}

TEST_CASE("synthetic corpus is deterministic and in range") {
  SyntheticSpec s;
  s.num_classes = 4;
  s.per_class = 3;
  s.size = 8;
  const auto a = make_synthetic(s);
  const auto b = make_synthetic(s);
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.images[i] == b.images[i]);
    for (double v : a.images[i].values()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
  s.num_classes = 11;
  CHECK_THROWS_AS(make_synthetic(s), ConfigError);
}
