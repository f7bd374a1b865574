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

#include <numeric>

#include "helpers.hpp"
#include "ltb/errors.hpp"
#include "ltb/nn/loss.hpp"
#include "ltb/rng.hpp"
#include "ltb/tensor.hpp"

using namespace ltb;

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
  }
  CHECK(Rng(42).next_u64() != c.next_u64());
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("rng uniform and below stay in range") {
  Rng r(7);
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++hist[r.below(5)];
  }
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("rng normal has unit variance") {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("rng state round trip") {
  Rng r(11);
  r.uniform();
  const auto st = r.state();
  const double next = r.uniform();
  Rng q(0);
  q.set_state(st);
  CHECK(q.uniform() == next);
}

TEST_CASE("categorical follows weights") {
  Rng r(5);
  std::vector<double> w{0.7, 0.2, 0.1};
  std::vector<int> hist(3, 0);
  for (int i = 0; i < 20000; ++i) ++hist[r.categorical(w)];
  CHECK(std::abs(hist[0] / 20000.0 - 0.7) < 0.015);
  CHECK(std::abs(hist[2] / 20000.0 - 0.1) < 0.01);
}

TEST_CASE("tensor slicing and concatenation") {
  Rng r(1);
  const Tensor a = testing::random_tensor({2, 3, 2, 2}, r);
  const Tensor b = testing::random_tensor({3, 3, 2, 2}, r);
  const Tensor ab = concat(a, b);
  CHECK(ab.n() == 5);
  const Tensor back = ab.slice(2, 5);
  CHECK(back.values() == b.values());
  CHECK(ab.slice(0, 2).values() == a.values());
  CHECK_THROWS(concat(a, testing::random_tensor({1, 2, 2, 2}, r)));
}

TEST_CASE("image stacking round trip") {
  Rng r(2);
  std::vector<Image> ims{testing::random_image(3, 4, 4, r), testing::random_image(3, 4, 4, r)};
  const Tensor t = stack_images(std::span<const Image>(ims));
  CHECK(t.shape() == Shape{2, 3, 4, 4});
  CHECK(image_from_tensor(t, 1) == ims[1]);
}

TEST_CASE("softmax is normalised and temperature narrows the gap") {
  const std::vector<double> logits{2.0, 0.5, -1.0, 0.0};
  double prev_gap = 1e9;
  for (double T : {1.0, 2.0, 3.0}) {
    const auto p = nn::softmax(logits, T);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double gap = *std::max_element(p.begin(), p.end()) - *std::min_element(p.begin(), p.end());
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  const auto big = nn::softmax(std::vector<double>{1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(big[1]));
}

TEST_CASE("softmax normalisation property over random logits") {
  Rng r(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(1 + r.below(12));
    for (double& v : l) v = r.uniform(-50, 50);
    const auto p = nn::softmax(l, r.uniform(0.1, 5));
    double s = 0;
    for (double v : p) {
      REQUIRE(v >= 0.0);
      s += v;
    }
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cross entropy matches hand computation") {
  // Two samples, two classes.
  Tensor logits({2, 2, 1, 1}, {1.0, 0.0, 0.0, 2.0});
  const std::vector<int> y{0, 0};
  const double expect = (std::log(1 + std::exp(-1.0)) + std::log(1 + std::exp(2.0))) / 2;
  Tensor g;
  CHECK(nn::cross_entropy(logits, y, &g) == doctest::Approx(expect).epsilon(1e-12));
  // d/dz of mean CE = (softmax - onehot) / N
  const double p0 = 1 / (1 + std::exp(-1.0));
  CHECK(g[0] == doctest::Approx((p0 - 1) / 2));
  CHECK(g[1] == doctest::Approx((1 - p0) / 2));
}

TEST_CASE("cross entropy near zero for confident correct logits") {
  Tensor logits({2, 3, 1, 1}, {1e6, 0, 0, 0, 0, 1e6});
  const std::vector<int> y{0, 2};
  CHECK(nn::cross_entropy(logits, y) == doctest::Approx(0.0).epsilon(1e-12));
}
