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
#include "ltb/nn/loss.hpp"
#include "ltb/training.hpp"

using namespace ltb;
using namespace ltb::training;

namespace {

Tensor logits_of(int n, int k, std::vector<double> v) { return Tensor(Shape{n, k, 1, 1}, std::move(v)); }

std::vector<double> flat_params(std::vector<nn::Param*> ps) {
  std::vector<double> out;
  for (auto* p : ps) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

}  // namespace

TEST_CASE("logit adjustment examples") {
  const std::vector<double> z{0.0, 0.0}, pi{0.8, 0.2};
  const auto a = logit_adjust(z, pi, 1.0);
  CHECK(a[0] == doctest::Approx(std::log(0.8)));
  CHECK(a[1] == doctest::Approx(std::log(0.2)));

  const std::vector<double> z3{1.5, -0.5, 2.0};
  CHECK(logit_adjust(z3, std::vector<double>{0.5, 0.3, 0.2}, 0.0) == z3);

  const std::vector<double> uni(3, 1.0 / 3);
  const auto s = logit_adjust(z3, uni, 2.0);
  const auto p0 = nn::softmax(z3), p1 = nn::softmax(s);
  for (int i = 0; i < 3; ++i) {
    CHECK(s[i] - z3[i] == doctest::Approx(s[0] - z3[0]));
    CHECK(p0[i] == doctest::Approx(p1[i]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(logit_adjust(z, std::vector<double>{1.0, 0.0}, 1.0), DomainError);
  CHECK_THROWS_AS(logit_adjust(z, pi, -1.0), DomainError);
}

TEST_CASE("logit adjustment keeps the argmax under uniform priors") {
  Rng rng(1);
  const std::vector<double> uni(5, 0.2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(5);
    for (double& v : z) v = rng.uniform(-5, 5);
    const auto a = logit_adjust(z, uni, rng.uniform(0, 3));
    REQUIRE(std::max_element(a.begin(), a.end()) - a.begin() == std::max_element(z.begin(), z.end()) - z.begin());
  }
}

TEST_CASE("total loss: hand-computed two-class instance") {
  const auto lc = logits_of(2, 2, {1.0, 0.0, 0.5, 0.5});
  const std::vector<int> yc{0, 1};
  const auto lb = logits_of(1, 2, {0.0, 2.0});
  const std::vector<int> yb{1};
  LossOptions opt;
  opt.lambda_div = 0.0;
  const auto l = total_loss_from_logits(lc, yc, lb, yb, nullptr, opt);
  const double clean = (std::log(1 + std::exp(-1.0)) + std::log(2.0)) / 2;
  const double back = std::log(1 + std::exp(-2.0));
  CHECK(std::abs(l.clean - clean) < 1e-6);
  CHECK(std::abs(l.backdoor - back) < 1e-6);
  CHECK(std::abs(l.total - clean - back) < 1e-6);
}

TEST_CASE("total loss: empty backdoor batch and saturated logits") {
  const auto lc = logits_of(2, 3, {2.0, 1.0, 0.0, 0.0, 0.0, 3.0});
  const std::vector<int> yc{0, 2};
  LossOptions opt;
  opt.lambda_div = 0.0;
  const Tensor empty;
  const auto l = total_loss_from_logits(lc, yc, empty, {}, nullptr, opt);
  CHECK(l.backdoor == 0.0);
  CHECK(l.diversity == 0.0);
  CHECK(l.total == l.clean);

  const auto sat = logits_of(2, 2, {1e6, 0, 0, 1e6});
  const std::vector<int> ys{0, 1};
  const auto s = total_loss_from_logits(sat, ys, sat, ys, nullptr, opt);
  CHECK(s.clean < 1e-9);
  CHECK(s.backdoor < 1e-9);

  CHECK_THROWS_AS(total_loss_from_logits(empty, {}, sat, ys, nullptr, opt), DomainError);
}

TEST_CASE("total loss decomposes into its components") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto lc = testing::random_tensor({4, 3, 1, 1}, rng, -3, 3);
    const auto lb = testing::random_tensor({2, 3, 1, 1}, rng, -3, 3);
    const std::vector<int> yc{0, 1, 2, 1}, yb{0, 0};
    const auto x = testing::random_tensor({2, 1, 2, 2}, rng), xp = testing::random_tensor({2, 1, 2, 2}, rng);
    const auto g = testing::random_tensor({2, 1, 2, 2}, rng), gp = testing::random_tensor({2, 1, 2, 2}, rng);
    const DiversityInputs div{&x, &xp, &g, &gp};
    LossOptions opt;
    opt.lambda_div = rng.uniform(0, 0.1);
    opt.tau = t % 2 == 0 ? 0.0 : 1.0;
    opt.priors = {0.6, 0.3, 0.1};
    LossGrads grads;
    const auto l = total_loss_from_logits(lc, yc, lb, yb, &div, opt, &grads);
    REQUIRE(std::abs(l.total - (l.clean + l.backdoor + opt.lambda_div * l.diversity)) < 1e-6);
    CHECK(l.diversity == doctest::Approx(trigger::diversity_loss(x, xp, g, gp, opt.epsilon)));
    CHECK(grads.clean_logits.shape() == lc.shape());
    CHECK(grads.diversity.triggers.shape() == g.shape());
  }
}

TEST_CASE("logit-adjusted loss gradient matches finite differences") {
  Rng rng(3);
  auto lc = testing::random_tensor({3, 4, 1, 1}, rng, -2, 2);
  const std::vector<int> y{0, 3, 1};
  LossOptions opt;
  opt.tau = 1.0;
  opt.priors = {0.4, 0.3, 0.2, 0.1};
  const Tensor empty;
  LossGrads g;
  total_loss_from_logits(lc, y, empty, {}, nullptr, opt, &g);
  for (std::size_t i = 0; i < lc.numel(); ++i) {
    const double fd = testing::central_difference(lc.values(), i, 1e-6, [&] {
      return total_loss_from_logits(lc, y, empty, {}, nullptr, opt).total;
    });
    CHECK(testing::rel_error(fd, g.clean_logits[i], 1e-8) < 1e-5);
  }
}

TEST_CASE("prepare_datasets wires the long-tailed set, plan and split") {
  auto cfg = testing::tiny_config();
  const auto ds = prepare_datasets(cfg);
  CHECK(ds.train.num_classes() == 6);
  CHECK(ds.train.counts().front() == 40);
  CHECK(ds.train.counts().back() == 10);
  CHECK(ds.plan.poison_indices.size() == static_cast<std::size_t>(std::lround(0.2 * ds.train.size())));
  CHECK(ds.clean_indices.size() + ds.plan.poison_indices.size() == ds.train.size());
  CHECK(ds.test.size() == 36u);
  CHECK(ds.split.num_classes() == 6);
  cfg.attack_poison_rate = 0.0;
  CHECK(prepare_datasets(cfg).plan.empty());
}

TEST_CASE("epochs = 0 leaves an initialised state") {
  auto cfg = testing::tiny_config();
  cfg.train_epochs = 0;
  const auto ds = prepare_datasets(cfg);
  const auto st = fit(cfg, ds);
  CHECK(st.history.empty());
  CHECK(st.epoch == 0);
  CHECK(st.schedule.scores() == std::vector<int>(6, 0));
}

TEST_CASE("run_epoch: schedule steps, head frozen when untrained, model and generator move") {
  auto cfg = testing::tiny_config();
  cfg.selector_head_steps = 0;
  const auto ds = prepare_datasets(cfg);
  auto st = init_state(cfg, ds);
  const auto head0 = flat_params(st.head->params());
  const auto model0 = flat_params(st.model->params());
  const auto gen0 = flat_params(st.generator->params());
  for (int e = 0; e < 2; ++e) {
    const auto before = st.schedule.scores();
    const auto& rec = run_epoch(st, ds);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(std::abs(rec.schedule[k] - before[k]) <= 1);
    CHECK(rec.schedule == st.schedule.scores());
    CHECK(rec.batches > 0);
    CHECK(std::abs(rec.losses.total - (rec.losses.clean + rec.losses.backdoor +
                                       cfg.attack_lambda_div * rec.losses.diversity)) < 1e-6);
  }
  CHECK(flat_params(st.head->params()) == head0);
  CHECK(flat_params(st.model->params()) != model0);
  CHECK(flat_params(st.generator->params()) != gen0);
  CHECK(st.epoch == 2);
  CHECK(st.history.size() == 2);
}

TEST_CASE("no-poison epoch leaves generator and head untouched") {
  auto cfg = testing::tiny_config();
  cfg.attack_poison_rate = 0.0;
  cfg.train_epochs = 1;
  const auto ds = prepare_datasets(cfg);
  auto st = init_state(cfg, ds);
  const auto head0 = flat_params(st.head->params());
  const auto gen0 = flat_params(st.generator->params());
  const auto& rec = run_epoch(st, ds);
  CHECK(rec.losses.backdoor == 0.0);
  CHECK(rec.losses.diversity == 0.0);
  CHECK(flat_params(st.generator->params()) == gen0);
  CHECK(flat_params(st.head->params()) == head0);
}

TEST_CASE("identical config and seed give identical runs") {
  const auto cfg = testing::tiny_config();
  const auto ds = prepare_datasets(cfg);
  const auto a = fit(cfg, ds);
  const auto b = fit(cfg, ds);
  REQUIRE(a.history.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(a.history[e].losses.total == b.history[e].losses.total);
    CHECK(a.history[e].report.asr.per_class.size() == b.history[e].report.asr.per_class.size());
    CHECK(a.history[e].report.acc.groups.all == b.history[e].report.acc.groups.all);
  }
  CHECK(flat_params(a.model->params()) == flat_params(b.model->params()));

  auto other = cfg;
  other.seed = 1;
  const auto c = fit(other, prepare_datasets(other));
  CHECK(c.history[0].losses.total != a.history[0].losses.total);
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
  auto cfg = testing::tiny_config();
  cfg.train_epochs = 3;
  cfg.train_lr_schedule = "cosine";
  const auto ds = prepare_datasets(cfg);
  const auto full = fit(cfg, ds);

  testing::TempDir dir("checkpoint");
  std::filesystem::create_directories(dir.path);
  const auto path = dir.path / "ckpt.bin";
  {
    auto st = init_state(cfg, ds);
    run_epoch(st, ds);
    save_checkpoint(st, path);
  }
  auto resumed = load_checkpoint(path, cfg, ds);
  CHECK(resumed.epoch == 1);
  CHECK(resumed.schedule.history() == std::vector<std::vector<int>>(full.schedule.history().begin(),
                                                                     full.schedule.history().begin() + 2));
  fit(resumed, ds);
  REQUIRE(resumed.epoch == 3);
  CHECK(flat_params(resumed.model->params()) == flat_params(full.model->params()));
  CHECK(flat_params(resumed.generator->params()) == flat_params(full.generator->params()));
  CHECK(flat_params(resumed.head->params()) == flat_params(full.head->params()));
  CHECK(resumed.schedule.history() == full.schedule.history());
  CHECK(resumed.history.back().losses.total == full.history.back().losses.total);
  CHECK(resumed.history.back().report.asr.groups.all == full.history.back().report.asr.groups.all);

  auto other = cfg;
  other.attack_alpha = 0.2;
  CHECK_THROWS_AS(load_checkpoint(path, other, ds), ConfigError);

  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_AS(load_checkpoint(path, cfg, ds), ConfigError);
}
