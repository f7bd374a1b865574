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

#include <span>
#include <vector>

#include "ltb/augment.hpp"
#include "ltb/longtail.hpp"
#include "ltb/nn/layers.hpp"
#include "ltb/nn/models.hpp"
#include "ltb/nn/optim.hpp"

namespace ltb::selectors {

/// Single FC layer from backbone features to one logit per operator, read
/// through a temperature softmax. High probability marks a weak operation.
class SelectorHead {
 public:
  SelectorHead() = default;
  /// Weights start at zero, so the initial distribution is uniform.
  SelectorHead(int feature_dim, int num_ops, double temperature, int strength);

  int feature_dim() const { return feature_dim_; }
  int num_ops() const { return num_ops_; }
  double temperature() const { return temperature_; }
  int strength() const { return strength_; }

  std::vector<double> logits(std::span<const double> feature) const;
  std::vector<double> probabilities(std::span<const double> feature) const;

  nn::Param& weight() { return weight_; }  // row-major [num_ops][feature_dim]
  nn::Param& bias() { return bias_; }
  const nn::Param& weight() const { return weight_; }
  const nn::Param& bias() const { return bias_; }
  std::vector<nn::Param*> params() { return {&weight_, &bias_}; }

 private:
  int feature_dim_ = 0;
  int num_ops_ = 0;
  double temperature_ = 1.0;
  int strength_ = 1;
  nn::Param weight_;
  nn::Param bias_;
};

/// Temperature softmax over the head's logits. Throws DomainError on a
/// feature dimension mismatch.
std::vector<double> predict_op_probabilities(const SelectorHead& head, std::span<const double> feature);

/// Frozen backbone features needed by the selector objective.
struct SelectorBatch {
  int feature_dim = 0;
  int num_ops = 0;
  std::vector<double> base;        // [B][d]: f*(x)
  std::vector<double> augmented;   // [B][N][d]: f*(m_i^q(x))
  std::vector<int> labels;         // [B]

  int size() const { return static_cast<int>(labels.size()); }
};

/// Runs the backbone (eval mode) on each D_t image and its N augmentations at
/// strength q. Throws DomainError if q is outside [0, s_max].
SelectorBatch build_selector_batch(nn::ResNetClassifier& model, const data::LongTailDataset& ds,
                                   std::span<const std::size_t> selector_set,
                                   const augment::Registry& registry, int q, Rng& rng);

/// Gradient of the selector objective w.r.t. the head parameters.
struct SelectorGrad {
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Mean cross-entropy of the frozen classifier on probability-weighted
/// aggregated features. Fills `grad` (head parameters only) when non-null.
double selector_loss(const SelectorHead& head, const SelectorBatch& batch, const nn::Linear& classifier,
                     SelectorGrad* grad = nullptr);

/// Convenience overload that builds the feature batch first.
double selector_loss(const SelectorHead& head, nn::ResNetClassifier& model,
                     const data::LongTailDataset& ds, std::span<const std::size_t> selector_set,
                     const augment::Registry& registry, int q, Rng& rng);

/// `steps` full-batch Adam updates of the head. Returns the loss before each
/// step followed by the final loss (steps + 1 values).
std::vector<double> train_selector_head(SelectorHead& head, nn::Adam& optimizer,
                                        const SelectorBatch& batch, const nn::Linear& classifier,
                                        int steps);

/// q distinct operations at strength q, drawn sequentially with probability
/// proportional to the head's prediction (renormalised after each draw).
/// Throws ConfigError if q > N.
std::vector<augment::AugOperation> choose_backdoor_ops(const SelectorHead& head,
                                                       std::span<const double> feature,
                                                       const augment::Registry& registry, int q,
                                                       Rng& rng);

}  // namespace ltb::selectors
