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

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ltb/augment.hpp"
#include "ltb/backdoor_selector.hpp"
#include "ltb/clean_selector.hpp"
#include "ltb/config.hpp"
#include "ltb/longtail.hpp"
#include "ltb/metrics.hpp"
#include "ltb/nn/models.hpp"
#include "ltb/nn/optim.hpp"
#include "ltb/trigger.hpp"

namespace ltb::training {

/// Everything fixed for the duration of a run.
struct Datasets {
  data::LongTailDataset train;
  data::PoisonPlan plan;
  std::vector<std::size_t> clean_indices;  // D \ D_m
  data::Dataset test;
  augment::RegistryPtr registry;
  metrics::GroupSplit split;
  std::vector<double> priors;
};

/// Loads or synthesises the source data, builds the long-tailed subset, the
/// operator registry and the poison plan (empty when the rate is 0).
Datasets prepare_datasets(const ExperimentConfig& config);

/// logits[k] + tau * log(prior_k). Throws DomainError on a non-positive prior.
std::vector<double> logit_adjust(std::span<const double> logits, std::span<const double> priors, double tau);
Tensor logit_adjust(const Tensor& logits, std::span<const double> priors, double tau);

struct LossBreakdown {
  double clean = 0.0;
  double backdoor = 0.0;
  double diversity = 0.0;
  double total = 0.0;
};

struct LossOptions {
  double lambda_div = 0.01;
  double epsilon = 1e-6;
  double tau = 0.0;
  std::vector<double> priors;  // required when tau > 0
};

/// Inputs of the diversity term: numerator sources/partners and the
/// generator outputs for their augmented forms.
struct DiversityInputs {
  const Tensor* sources = nullptr;
  const Tensor* partners = nullptr;
  const Tensor* triggers = nullptr;
  const Tensor* partner_triggers = nullptr;
};

/// Gradients produced by total_loss_from_logits.
struct LossGrads {
  Tensor clean_logits;
  Tensor backdoor_logits;
  trigger::DiversityGrad diversity;
};

/// total = CE(clean) + CE(backdoor) + lambda_div * L_div, with logit
/// adjustment applied to both cross-entropies when tau > 0. An empty
/// backdoored batch contributes zero to both attack terms. Throws
/// DomainError on an empty clean batch.
LossBreakdown total_loss_from_logits(const Tensor& clean_logits, std::span<const int> clean_labels,
                                     const Tensor& backdoor_logits, std::span<const int> backdoor_labels,
                                     const DiversityInputs* diversity, const LossOptions& opts,
                                     LossGrads* grads = nullptr);

/// Forward-only evaluation of the joint objective (model in eval mode). The
/// diversity term is computed from `generator` on the augmented batches when
/// both it and the partner batches are provided.
LossBreakdown compute_total_loss(nn::ResNetClassifier& model, const Tensor& clean_images,
                                 std::span<const int> clean_labels, const Tensor& backdoor_images,
                                 std::span<const int> backdoor_labels, nn::TriggerGenerator* generator,
                                 const Tensor* augmented_poison, const Tensor* augmented_partners,
                                 const LossOptions& opts);

/// One metrics row.
struct EpochRecord {
  int epoch = 0;
  LossBreakdown losses;  // batch means over the epoch
  int batches = 0;
  double selector_loss_before = 0.0;
  double selector_loss_after = 0.0;
  std::vector<double> selector_class_acc;  // acc(k) on D_t
  std::vector<int> schedule;               // s(k) after this epoch's update
  metrics::MetricsReport report;
};

/// Model, generator, selectors and optimiser state of a run.
struct RunState {
  ExperimentConfig config;
  std::unique_ptr<nn::ResNetClassifier> model;
  std::unique_ptr<nn::TriggerGenerator> generator;
  std::unique_ptr<selectors::SelectorHead> head;
  selectors::StrengthSchedule schedule;
  std::unique_ptr<nn::Sgd> model_opt;
  std::unique_ptr<nn::Adam> generator_opt;
  std::unique_ptr<nn::Adam> head_opt;
  int epoch = 0;  // completed epochs
  Rng rng;
  std::vector<EpochRecord> history;
};

RunState init_state(const ExperimentConfig& config, const Datasets& datasets);

/// Stage 1 (selectors) then stage 2 (model + generator), then evaluation.
/// Appends one EpochRecord to state.history and returns it.
const EpochRecord& run_epoch(RunState& state, const Datasets& datasets);

/// Clean ACC and ASR on the held-out test set.
metrics::MetricsReport evaluate(RunState& state, const Datasets& datasets);

/// Batch predictor over the current model (eval mode, raw logits).
metrics::BatchPredictor make_predictor(nn::ResNetClassifier& model);
/// Trigger used for ASR: G on the raw test image, or the fixed patch.
metrics::TriggerFn make_trigger_fn(RunState& state);

using EpochCallback = std::function<void(const RunState&, const EpochRecord&)>;

/// Runs the remaining epochs of `state` (up to config.train_epochs).
void fit(RunState& state, const Datasets& datasets, const EpochCallback& on_epoch = {});
/// Fresh state, then fit.
RunState fit(const ExperimentConfig& config, const Datasets& datasets, const EpochCallback& on_epoch = {});

void save_checkpoint(const RunState& state, const std::filesystem::path& path);
/// Restores a state saved by save_checkpoint. Throws ConfigError if the
/// checkpoint was written under a different config hash.
RunState load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                         const Datasets& datasets);

}  // namespace ltb::training
