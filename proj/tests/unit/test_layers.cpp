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

#include <memory>

#include "helpers.hpp"
#include "ltb/errors.hpp"
#include "ltb/nn/layers.hpp"
#include "ltb/nn/models.hpp"
#include "ltb/nn/optim.hpp"

using namespace ltb;
using namespace ltb::nn;

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

// Checks input and parameter gradients of `forward` under loss = <r, out>.
template <typename Fwd, typename Bwd>
void check_gradients(Fwd forward, Bwd backward, Tensor x, std::vector<Param*> params, double tol = 1e-6) {
  Rng r(99);
  const Tensor out = forward(x);
  const Tensor weights = testing::random_tensor(out.shape(), r, -1, 1);
  zero_grads(params);
  forward(x);
  const Tensor dx = backward(weights);
  auto loss = [&] { return dot(forward(x), weights); };
  for (std::size_t i = 0; i < x.numel(); i += std::max<std::size_t>(1, x.numel() / 40)) {
    const double num = testing::central_difference(x.values(), i, 1e-5, loss);
    CHECK(testing::rel_error(dx[i], num, 1e-6) < tol);
  }
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 20)) {
      const double num = testing::central_difference(p->value, i, 1e-5, loss);
      INFO(p->name << "[" << i << "]");
      CHECK(testing::rel_error(p->grad[i], num, 1e-6) < tol);
    }
  }
}

}  // namespace

TEST_CASE("conv2d gradients, stride 1 and 2") {
  for (int stride : {1, 2}) {
    Rng r(1);
    Conv2d conv(2, 3, 3, stride, 1, r, true, "c");
    std::vector<Param*> ps;
    conv.collect_params(ps);
    check_gradients([&](const Tensor& x) { return conv.forward(x, Mode::kTrain); },
                    [&](const Tensor& g) { return conv.backward(g); },
                    testing::random_tensor({2, 2, 5, 5}, r), ps);
  }
}

TEST_CASE("conv2d matches direct convolution") {
  Rng r(4);
  Conv2d conv(1, 1, 3, 1, 1, r, false);
  std::vector<Param*> ps;
  conv.collect_params(ps);
  const Tensor x = testing::random_tensor({1, 1, 4, 4}, r);
  const Tensor y = conv.forward(x, Mode::kEval);
  const auto& w = ps[0]->value;
  for (int oy = 0; oy < 4; ++oy) {
    for (int ox = 0; ox < 4; ++ox) {
      double s = 0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy + ky - 1, ix = ox + kx - 1;
          if (iy >= 0 && iy < 4 && ix >= 0 && ix < 4) s += w[ky * 3 + kx] * x.at(0, 0, iy, ix);
        }
      }
      CHECK(y.at(0, 0, oy, ox) == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects wrong channel count") {
  Rng r(1);
  Conv2d conv(3, 4, 3, 1, 1, r);
  CHECK_THROWS_AS(conv.forward(Tensor({1, 2, 4, 4}), Mode::kEval), DomainError);
}

TEST_CASE("batchnorm gradients in train mode") {
  Rng r(2);
  BatchNorm2d bn(3, "bn");
  std::vector<Param*> ps;
  bn.collect_params(ps);
  for (double& v : ps[0]->value) v = r.uniform(0.5, 1.5);
  for (double& v : ps[1]->value) v = r.uniform(-0.5, 0.5);
  check_gradients([&](const Tensor& x) { return bn.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return bn.backward(g); },
                  testing::random_tensor({3, 3, 2, 2}, r, -2, 2), ps, 1e-5);
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  Rng r(2);
  BatchNorm2d bn(1);
  const Tensor x({1, 1, 1, 2}, {1.0, 3.0});
  const Tensor y = bn.forward(x, Mode::kEval);
  // Fresh running stats: mean 0, var 1.
  CHECK(y[0] == doctest::Approx(1.0 / std::sqrt(1 + 1e-5)));
  bn.forward(x, Mode::kTrain);
  std::vector<std::vector<double>*> bufs;
  bn.collect_buffers(bufs);
  CHECK((*bufs[0])[0] == doctest::Approx(0.2));  // 0.9 * 0 + 0.1 * 2
}

TEST_CASE("linear, pooling, upsampling and activations gradients") {
  Rng r(3);
  Linear fc(6, 4, r, "fc");
  std::vector<Param*> ps;
  fc.collect_params(ps);
  check_gradients([&](const Tensor& x) { return fc.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return fc.backward(g); }, testing::random_tensor({3, 6, 1, 1}, r), ps);

  GlobalAvgPool gap;
  check_gradients([&](const Tensor& x) { return gap.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return gap.backward(g); }, testing::random_tensor({2, 3, 3, 3}, r), {});

  Upsample2x up;
  check_gradients([&](const Tensor& x) { return up.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return up.backward(g); }, testing::random_tensor({2, 2, 2, 3}, r), {});

  Sigmoid sig;
  check_gradients([&](const Tensor& x) { return sig.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return sig.backward(g); }, testing::random_tensor({2, 2, 2, 2}, r, -3, 3),
                  {});
  // Keep samples away from the ReLU kink.
  Tensor xr = testing::random_tensor({2, 2, 2, 2}, r, 0.1, 1);
  for (std::size_t i = 0; i < xr.numel(); i += 2) xr[i] = -xr[i];
  ReLU relu;
  check_gradients([&](const Tensor& x) { return relu.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return relu.backward(g); }, xr, {});
}

TEST_CASE("residual block gradients with projection shortcut") {
  Rng r(5);
  ResidualBlock block(2, 4, 2, r, "b");
  std::vector<Param*> ps;
  block.collect_params(ps);
  check_gradients([&](const Tensor& x) { return block.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return block.backward(g); }, testing::random_tensor({3, 2, 4, 4}, r), ps,
                  1e-4);
}

TEST_CASE("classifier end-to-end input gradient") {
  Rng r(6);
  ResNetClassifier model(ClassifierSpec{3, 4, {4, 6}}, r);
  CHECK(model.feature_dim() == 6);
  check_gradients([&](const Tensor& x) { return model.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return model.backward(g); }, testing::random_tensor({3, 3, 4, 4}, r),
                  model.params(), 1e-4);
}

TEST_CASE("generator gradients and output range") {
  Rng r(7);
  TriggerGenerator gen(GeneratorSpec{1, 4, 4, {2, 3}}, r);
  testing::jitter(gen.params(), r);
  check_gradients([&](const Tensor& x) { return gen.forward(x, Mode::kTrain); },
                  [&](const Tensor& g) { return gen.backward(g); }, testing::random_tensor({2, 1, 4, 4}, r),
                  gen.params(), 1e-4);
  TriggerGenerator big(GeneratorSpec{}, r);
  const Tensor out = big.forward(testing::random_tensor({4, 3, 16, 16}, r));
  CHECK(out.shape() == Shape{4, 3, 16, 16});
  for (double v : out.values()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  CHECK_THROWS_AS(big.forward(Tensor({1, 3, 8, 8})), DomainError);
  CHECK_THROWS_AS(TriggerGenerator(GeneratorSpec{3, 12, 12, {4, 4, 4, 4}}, r), ConfigError);
}

TEST_CASE("sgd step with momentum and weight decay") {
  Param p("p", 1);
  p.value[0] = 1.0;
  Sgd opt({&p}, {0.1, 0.9, 0.01});
  p.grad[0] = 0.5;
  opt.step();
  // v = 0.5 + 0.01 * 1 = 0.51; w = 1 - 0.051
  CHECK(p.value[0] == doctest::Approx(0.949));
  p.grad[0] = 0.5;
  opt.step();
  // v = 0.9 * 0.51 + 0.5 + 0.01 * 0.949
  const double v = 0.9 * 0.51 + 0.5 + 0.01 * 0.949;
  CHECK(p.value[0] == doctest::Approx(0.949 - 0.1 * v));
}

TEST_CASE("adam first step moves by lr along the gradient sign") {
  Param p("p", 2);
  Adam opt({&p}, {0.01});
  p.grad = {3.0, -0.001};
  opt.step();
  CHECK(p.value[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(opt.step_count() == 1);
}
