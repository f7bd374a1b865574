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
#include "ltb/backdoor_selector.hpp"
#include "ltb/longtail.hpp"
#include "ltb/nn/models.hpp"

namespace ltb::trigger {

struct BlendConfig {
  double alpha = 0.1;
  double lambda_div = 0.01;
  double epsilon = 1e-6;
};

/// Runs the generator in eval mode. Deterministic given its parameters.
Tensor generate_trigger(nn::TriggerGenerator& generator, const Tensor& images);
Image generate_trigger(nn::TriggerGenerator& generator, const Image& image);

/// (1 - alpha) * x + alpha * g, clamped to [0, 1].
Image blend(const Image& x, const Image& g, double alpha);
Tensor blend(const Tensor& x, const Tensor& g, double alpha);

/// Gradients of the diversity loss w.r.t. both generator outputs.
struct DiversityGrad {
  Tensor triggers;
  Tensor partner_triggers;
};

/// mean_i ||x_i - x'_i|| / (||g_i - g'_i|| + eps) with L2 norms over each
/// flattened sample. `sources`/`partners` feed the numerator and
/// `triggers`/`partner_triggers` (generator outputs) the denominator.
/// Throws DomainError on an empty batch or mismatched sizes.
double diversity_loss(const Tensor& sources, const Tensor& partners, const Tensor& triggers,
                      const Tensor& partner_triggers, double epsilon, DiversityGrad* grad = nullptr);

/// Generator-level form: both numerator and generator inputs are the
/// (already augmented) batches.
double diversity_loss(nn::TriggerGenerator& generator, const Tensor& augmented,
                      const Tensor& augmented_partners, double epsilon);

/// Backdoored images with their target labels.
struct BackdoorBatch {
  Tensor augmented;  // x~ after selector-chosen operations
  Tensor triggers;   // G(x~)
  Tensor images;     // blend(x~, G(x~), alpha)
  std::vector<int> labels;
  std::vector<int> source_labels;
};

/// Backbone features (eval mode) for selector decisions, one row per image.
std::vector<std::vector<double>> backbone_features(nn::ResNetClassifier& model, const Tensor& images);

/// Applies selector-chosen weak operations at strength q to each image.
Tensor augment_for_backdoor(const selectors::SelectorHead& head, nn::ResNetClassifier& model,
                            const Tensor& images, const augment::Registry& registry, int q, Rng& rng);

/// x -> selector ops -> x~ -> blend(x~, G(x~), alpha); labels become eta(y).
/// Throws DomainError if an index is not in the poison plan.
BackdoorBatch make_backdoored_batch(std::span<const std::size_t> poison_indices,
                                    const data::LongTailDataset& ds, const data::PoisonPlan& plan,
                                    const selectors::SelectorHead& head, nn::ResNetClassifier& model,
                                    nn::TriggerGenerator& generator, const augment::Registry& registry,
                                    int q, double alpha, Rng& rng);

enum class PatchPattern { kCheckerboard, kWhite, kBlack };

/// Square patch at a fixed position.
struct PatchSpec {
  int size = 3;
  int top = 0;
  int left = 0;
  PatchPattern pattern = PatchPattern::kCheckerboard;

  static PatchSpec bottom_right(int size, int height, int width,
                                PatchPattern pattern = PatchPattern::kCheckerboard);
};

/// Overwrites the patch region in every channel; the rest is untouched.
/// Throws DomainError if the patch does not fit.
Image apply_fixed_patch_trigger(const Image& image, const PatchSpec& patch);
Tensor apply_fixed_patch_trigger(const Tensor& images, const PatchSpec& patch);

}  // namespace ltb::trigger
