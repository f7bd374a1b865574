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

#include "ltb/training.hpp"

#include <cmath>
#include <numbers>

#include "ltb/errors.hpp"
#include "ltb/nn/loss.hpp"

namespace ltb::training {

namespace {

/// Independent random streams of a run, keyed by purpose.
enum class Stream : std::uint64_t {
  kModelInit = 1,
  kGeneratorInit,
  kPoison,
  kSelectorSet,
  kCleanEval,
  kSelectorAug,
  kShuffle,
  kBatch,
};

std::uint64_t stream_seed(const ExperimentConfig& cfg, Stream s, std::uint64_t epoch = 0,
                          std::uint64_t index = 0) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(s) * 1000003ULL + epoch, index);
}

/// The synthetic corpus is fixed; run seeds vary everything else.
constexpr std::uint64_t kCorpusSeed = 0x6c74626b2d636f72ULL;
constexpr std::uint64_t kTestSalt = 0x7465737473706c74ULL;

data::Dataset restrict_classes(data::Dataset ds, int num_classes) {
  if (ds.num_classes == num_classes) return ds;
  data::Dataset out;
  out.num_classes = num_classes;
  out.source = ds.source;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] < num_classes) {
      out.images.push_back(std::move(ds.images[i]));
      out.labels.push_back(ds.labels[i]);
    }
  }
  return out;
}

}  // namespace

Datasets prepare_datasets(const ExperimentConfig& cfg) {
  cfg.validate();
  data::Dataset source, test;
  if (cfg.dataset_source == "synthetic") {
    data::SyntheticSpec spec;
    spec.num_classes = cfg.dataset_classes;
    spec.per_class = cfg.dataset_n_max;
    spec.channels = cfg.dataset_channels;
    spec.size = cfg.dataset_size;
    spec.noise = cfg.dataset_noise;
    spec.seed = kCorpusSeed;
    source = data::make_synthetic(spec);
    spec.per_class = cfg.dataset_test_per_class;
    spec.seed = kCorpusSeed ^ kTestSalt;
    test = data::make_synthetic(spec);
  } else if (cfg.dataset_source == "packed") {
    source = data::load_packed(cfg.dataset_train_path);
    test = data::load_packed(cfg.dataset_test_path);
  } else {
    source = data::load_folder(cfg.dataset_train_path, cfg.dataset_channels);
    test = data::load_folder(cfg.dataset_test_path, cfg.dataset_channels);
  }
  if (source.images.empty() || test.images.empty()) throw ConfigError("dataset", "empty source data");
  if (test.num_classes < cfg.dataset_classes) {
    throw ConfigError("dataset.test_path", "test set has fewer classes than dataset.classes");
  }
  test = restrict_classes(std::move(test), cfg.dataset_classes);
  const Image& first = source.images.front();
  if (first.channels() != cfg.dataset_channels) {
    throw ConfigError("dataset.channels", "source images have " + std::to_string(first.channels()) + " channels");
  }

  auto lt = data::build_longtail(source, cfg.dataset_imbalance_ratio, cfg.dataset_classes,
                                 data::parse_profile(cfg.dataset_profile), cfg.dataset_n_max);
  auto registry = std::make_shared<const augment::Registry>(
      augment::Registry::build(cfg.augment_operators.empty() ? augment::Registry::default_operator_names()
                                                             : cfg.augment_operators,
                               cfg.augment_s_max)
          .with_image_shape(first.channels(), first.height(), first.width()));

  data::PoisonPlan plan = data::empty_poison_plan(cfg.attack_target_label);
  if (cfg.attack_poison_rate > 0.0) {
    Rng prng(stream_seed(cfg, Stream::kPoison));
    plan = data::select_poison_subset(lt, cfg.attack_poison_rate, cfg.attack_target_label, prng);
  }
  auto clean = plan.clean_indices(lt.size());
  auto split = metrics::group_split(lt.counts());
  auto priors = lt.class_priors();
  return Datasets{std::move(lt),    std::move(plan),  std::move(clean), std::move(test),
                  std::move(registry), std::move(split), std::move(priors)};
}

std::vector<double> logit_adjust(std::span<const double> logits, std::span<const double> priors, double tau) {
  if (!(tau >= 0.0)) throw DomainError("logit_adjust: tau must be >= 0");
  if (priors.size() != logits.size()) throw DomainError("logit_adjust: prior count mismatch");
  std::vector<double> out(logits.begin(), logits.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(priors[k] > 0.0)) throw DomainError("logit_adjust: priors must be positive");
    if (tau > 0.0) out[k] += tau * std::log(priors[k]);
  }
  return out;
}

Tensor logit_adjust(const Tensor& logits, std::span<const double> priors, double tau) {
  Tensor out = logits;
  for (int i = 0; i < logits.n(); ++i) {
    const auto adj = logit_adjust(logits.sample(i), priors, tau);
    std::copy(adj.begin(), adj.end(), out.sample(i).begin());
  }
  return out;
}

LossBreakdown total_loss_from_logits(const Tensor& clean_logits, std::span<const int> clean_labels,
                                     const Tensor& backdoor_logits, std::span<const int> backdoor_labels,
                                     const DiversityInputs* diversity, const LossOptions& opts,
                                     LossGrads* grads) {
  if (clean_logits.n() == 0) throw DomainError("compute_total_loss: empty clean batch");
  const auto adjust = [&](const Tensor& l) {
    return opts.tau > 0.0 ? logit_adjust(l, opts.priors, opts.tau) : l;
  };
  LossBreakdown out;
  out.clean = nn::cross_entropy(adjust(clean_logits), clean_labels, grads ? &grads->clean_logits : nullptr);
  if (backdoor_logits.n() > 0) {
    out.backdoor =
        nn::cross_entropy(adjust(backdoor_logits), backdoor_labels, grads ? &grads->backdoor_logits : nullptr);
  } else if (grads) {
    grads->backdoor_logits = Tensor();
  }
  if (diversity && diversity->sources && diversity->sources->n() > 0) {
    out.diversity = trigger::diversity_loss(*diversity->sources, *diversity->partners, *diversity->triggers,
                                            *diversity->partner_triggers, opts.epsilon,
                                            grads ? &grads->diversity : nullptr);
    if (grads) {
      grads->diversity.triggers *= opts.lambda_div;
      grads->diversity.partner_triggers *= opts.lambda_div;
    }
  }
  out.total = out.clean + out.backdoor + opts.lambda_div * out.diversity;
  return out;
}

LossBreakdown compute_total_loss(nn::ResNetClassifier& model, const Tensor& clean_images,
                                 std::span<const int> clean_labels, const Tensor& backdoor_images,
                                 std::span<const int> backdoor_labels, nn::TriggerGenerator* generator,
                                 const Tensor* augmented_poison, const Tensor* augmented_partners,
                                 const LossOptions& opts) {
  if (clean_images.n() == 0) throw DomainError("compute_total_loss: empty clean batch");
  const Tensor lc = model.forward(clean_images, nn::Mode::kEval);
  const Tensor lb = backdoor_images.n() > 0 ? model.forward(backdoor_images, nn::Mode::kEval) : Tensor();
  Tensor g, gp;
  DiversityInputs div;
  if (generator && augmented_poison && augmented_partners && augmented_poison->n() > 0) {
    g = generator->forward(*augmented_poison, nn::Mode::kEval);
    gp = generator->forward(*augmented_partners, nn::Mode::kEval);
    div = {augmented_poison, augmented_partners, &g, &gp};
  }
  return total_loss_from_logits(lc, clean_labels, lb, backdoor_labels, div.sources ? &div : nullptr, opts);
}

RunState init_state(const ExperimentConfig& cfg, const Datasets& ds) {
  cfg.validate();
  RunState s;
  s.config = cfg;
  const Image& probe = ds.train.image(0);
  Rng mrng(stream_seed(cfg, Stream::kModelInit));
  s.model = std::make_unique<nn::ResNetClassifier>(
      nn::ClassifierSpec{probe.channels(), ds.train.num_classes(), cfg.model_widths}, mrng);
  Rng grng(stream_seed(cfg, Stream::kGeneratorInit));
  s.generator = std::make_unique<nn::TriggerGenerator>(
      nn::GeneratorSpec{probe.channels(), probe.height(), probe.width(), cfg.generator_widths}, grng);
  s.head = std::make_unique<selectors::SelectorHead>(s.model->feature_dim(), ds.registry->size(),
                                                     cfg.selector_temperature, cfg.selector_q);
  s.schedule = selectors::StrengthSchedule(ds.train.num_classes(), cfg.augment_s_max, cfg.selector_gamma);
  s.model_opt = std::make_unique<nn::Sgd>(
      s.model->params(), nn::Sgd::Options{cfg.train_lr, cfg.train_momentum, cfg.train_weight_decay});
  s.generator_opt = std::make_unique<nn::Adam>(s.generator->params(), nn::Adam::Options{cfg.train_generator_lr});
  s.head_opt = std::make_unique<nn::Adam>(s.head->params(), nn::Adam::Options{cfg.selector_head_lr});
  s.rng = Rng(cfg.seed);
  return s;
}

metrics::BatchPredictor make_predictor(nn::ResNetClassifier& model) {
  return [&model](const Tensor& x) {
    const Tensor logits = model.forward(x, nn::Mode::kEval);
    std::vector<int> out(static_cast<std::size_t>(logits.n()));
    for (int i = 0; i < logits.n(); ++i) out[static_cast<std::size_t>(i)] = nn::argmax_row(logits, i);
    return out;
  };
}

metrics::TriggerFn make_trigger_fn(RunState& state) {
  const auto& cfg = state.config;
  if (cfg.attack_trigger == "patch") {
    return [size = cfg.attack_patch_size](const Tensor& x) {
      return trigger::apply_fixed_patch_trigger(x, trigger::PatchSpec::bottom_right(size, x.h(), x.w()));
    };
  }
  return [gen = state.generator.get(), alpha = cfg.attack_alpha](const Tensor& x) {
    return trigger::blend(x, trigger::generate_trigger(*gen, x), alpha);
  };
}

metrics::MetricsReport evaluate(RunState& state, const Datasets& ds) {
  metrics::MetricsReport r;
  r.epoch = state.epoch;
  r.target_label = state.config.attack_target_label;
  r.config_hash = state.config.hash();
  const auto predict = make_predictor(*state.model);
  r.acc = metrics::clean_accuracy_report(predict, ds.test, ds.split);
  r.asr = metrics::attack_success_report(predict, make_trigger_fn(state), ds.test, r.target_label, ds.split);
  return r;
}

const EpochRecord& run_epoch(RunState& state, const Datasets& ds) {
  const ExperimentConfig& cfg = state.config;
  const augment::Registry& reg = *ds.registry;
  const int t = state.epoch + 1;
  if (cfg.train_lr_schedule == "cosine" && cfg.train_epochs > 0) {
    // Both stage-2 optimisers follow the decay; a generator still moving at
    // full rate outruns an annealed classifier.
    const double f = 0.5 * (1.0 + std::cos(std::numbers::pi * (t - 1) / cfg.train_epochs));
    state.model_opt->set_lr(cfg.train_lr * f);
    state.generator_opt->set_lr(cfg.train_generator_lr * f);
  }
  EpochRecord rec;
  rec.epoch = t;

  // Stage 1: selectors. The classifier and generator are only read here.
  Rng dt_rng(stream_seed(cfg, Stream::kSelectorSet, static_cast<std::uint64_t>(t)));
  const auto dt = data::sample_selector_set(ds.train, cfg.selector_dt_per_class, dt_rng);
  Rng cs_rng(stream_seed(cfg, Stream::kCleanEval, static_cast<std::uint64_t>(t)));
  rec.selector_class_acc =
      selectors::evaluate_class_accuracy(make_predictor(*state.model), ds.train, dt, state.schedule, reg, cs_rng);
  state.schedule.update(rec.selector_class_acc);
  rec.schedule = state.schedule.scores();

  const bool poisoning = !ds.plan.empty();
  if (poisoning && cfg.selector_q > 0) {
    Rng sa_rng(stream_seed(cfg, Stream::kSelectorAug, static_cast<std::uint64_t>(t)));
    const auto sb = selectors::build_selector_batch(*state.model, ds.train, dt, reg, cfg.selector_q, sa_rng);
    const auto losses =
        selectors::train_selector_head(*state.head, *state.head_opt, sb, state.model->head(), cfg.selector_head_steps);
    if (!losses.empty()) {
      rec.selector_loss_before = losses.front();
      rec.selector_loss_after = losses.back();
    }
  }

  // Stage 2: classifier and trigger generator, selectors frozen.
  std::vector<std::size_t> clean = ds.clean_indices;
  std::vector<std::size_t> poison = ds.plan.poison_indices;
  Rng sh(stream_seed(cfg, Stream::kShuffle, static_cast<std::uint64_t>(t)));
  sh.shuffle(clean.begin(), clean.end());
  sh.shuffle(poison.begin(), poison.end());

  const int B = cfg.train_batch_size;
  const int bp = poisoning ? std::max(1, static_cast<int>(std::lround(cfg.attack_poison_rate * B))) : 0;
  const int bc = B - bp;
  const std::size_t n_batches = (clean.size() + static_cast<std::size_t>(bc) - 1) / static_cast<std::size_t>(bc);
  const bool use_generator = cfg.attack_trigger == "generator";
  const LossOptions lopt{cfg.attack_lambda_div, cfg.attack_epsilon, cfg.train_logit_adjust_tau, ds.priors};
  std::size_t cursor = 0;

  for (std::size_t b = 0; b < n_batches; ++b) {
    Rng br(stream_seed(cfg, Stream::kBatch, static_cast<std::uint64_t>(t), b));
    const std::size_t c0 = b * static_cast<std::size_t>(bc);
    const std::size_t c1 = std::min(clean.size(), c0 + static_cast<std::size_t>(bc));

    std::vector<Image> clean_imgs;
    std::vector<int> clean_labels;
    for (std::size_t i = c0; i < c1; ++i) {
      const int y = ds.train.label(clean[i]);
      Image im = ds.train.image(clean[i]);
      if (br.coin(cfg.selector_clean_aug_prob)) {
        const auto ops = selectors::choose_clean_ops(state.schedule, y, reg, br);
        im = augment::apply_pipeline(reg, ops, im, br);
      }
      clean_imgs.push_back(std::move(im));
      clean_labels.push_back(y);
    }
    const Tensor xc = stack_images(std::span<const Image>(clean_imgs));

    Tensor raw_poison, raw_partners, aug_both, gen_out, g, gp, backdoored;
    std::vector<int> bd_labels;
    if (bp > 0) {
      std::vector<const Image*> pim, qim;
      for (int i = 0; i < bp; ++i) {
        const std::size_t idx = poison[cursor++ % poison.size()];
        pim.push_back(&ds.train.image(idx));
        bd_labels.push_back(ds.plan.eta(ds.train.label(idx)));
        qim.push_back(&ds.train.image(ds.clean_indices[br.below(ds.clean_indices.size())]));
      }
      raw_poison = stack_images(pim);
      raw_partners = stack_images(qim);
      aug_both = trigger::augment_for_backdoor(*state.head, *state.model, concat(raw_poison, raw_partners), reg,
                                               cfg.selector_q, br);
      const Tensor aug_poison = aug_both.slice(0, bp);
      if (use_generator) {
        gen_out = state.generator->forward(aug_both, nn::Mode::kTrain);
        g = gen_out.slice(0, bp);
        gp = gen_out.slice(bp, 2 * bp);
        backdoored = trigger::blend(aug_poison, g, cfg.attack_alpha);
      } else {
        backdoored = trigger::apply_fixed_patch_trigger(
            aug_poison, trigger::PatchSpec::bottom_right(cfg.attack_patch_size, aug_poison.h(), aug_poison.w()));
      }
    }

    state.model_opt->zero_grad();
    state.generator_opt->zero_grad();
    const int nc = xc.n();
    const Tensor logits = state.model->forward(bp > 0 ? concat(xc, backdoored) : xc, nn::Mode::kTrain);
    const Tensor lc = logits.slice(0, nc);
    const Tensor lb = bp > 0 ? logits.slice(nc, nc + bp) : Tensor();
    DiversityInputs div{&raw_poison, &raw_partners, &g, &gp};
    LossGrads grads;
    const LossBreakdown lb_out =
        total_loss_from_logits(lc, clean_labels, lb, bd_labels, use_generator && bp > 0 ? &div : nullptr, lopt, &grads);

    const Tensor glogits = bp > 0 ? concat(grads.clean_logits, grads.backdoor_logits) : grads.clean_logits;
    const Tensor dx = state.model->backward(glogits);
    if (use_generator && bp > 0) {
      // blend is (1 - alpha) x~ + alpha G(x~); its clamp never binds for inputs in [0, 1].
      Tensor dgen(aug_both.shape());
      const std::size_t per = dgen.shape().sample_size();
      for (int i = 0; i < bp; ++i) {
        auto src = dx.sample(nc + i);
        auto dg = dgen.sample(i);
        auto ddiv = grads.diversity.triggers.sample(i);
        for (std::size_t j = 0; j < per; ++j) dg[j] = cfg.attack_alpha * src[j] + ddiv[j];
        auto dgq = dgen.sample(bp + i);
        auto ddivq = grads.diversity.partner_triggers.sample(i);
        for (std::size_t j = 0; j < per; ++j) dgq[j] = ddivq[j];
      }
      state.generator->backward(dgen);
      state.generator_opt->step();
    }
    state.model_opt->step();

    rec.losses.clean += lb_out.clean;
    rec.losses.backdoor += lb_out.backdoor;
    rec.losses.diversity += lb_out.diversity;
    rec.losses.total += lb_out.total;
    ++rec.batches;
  }
  if (rec.batches > 0) {
    const double n = rec.batches;
    rec.losses.clean /= n;
    rec.losses.backdoor /= n;
    rec.losses.diversity /= n;
    rec.losses.total /= n;
  }

  state.epoch = t;
  rec.report = evaluate(state, ds);
  state.history.push_back(std::move(rec));
  return state.history.back();
}

void fit(RunState& state, const Datasets& ds, const EpochCallback& on_epoch) {
  while (state.epoch < state.config.train_epochs) {
    const EpochRecord& rec = run_epoch(state, ds);
    if (on_epoch) on_epoch(state, rec);
  }
}

RunState fit(const ExperimentConfig& config, const Datasets& ds, const EpochCallback& on_epoch) {
  RunState state = init_state(config, ds);
  fit(state, ds, on_epoch);
  return state;
}

}  // namespace ltb::training
