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

#include "ltb/trigger.hpp"

#include <algorithm>
#include <cmath>

#include "ltb/errors.hpp"

namespace ltb::trigger {

Tensor generate_trigger(nn::TriggerGenerator& generator, const Tensor& images) {
  return generator.forward(images, nn::Mode::kEval);
}

Image generate_trigger(nn::TriggerGenerator& generator, const Image& image) {
  const Tensor t = generate_trigger(generator, stack_images(std::span<const Image>(&image, 1)));
  return image_from_tensor(t, 0);
}

Image blend(const Image& x, const Image& g, double alpha) {
  if (!x.same_shape(g)) throw DomainError("blend: image and trigger shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("blend: alpha must lie in [0, 1]");
  Image out = x;
  auto o = out.pixels();
  auto gp = g.pixels();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp((1.0 - alpha) * o[i] + alpha * gp[i], 0.0, 1.0);
  return out;
}

Tensor blend(const Tensor& x, const Tensor& g, double alpha) {
  if (!(x.shape() == g.shape())) throw DomainError("blend: image and trigger shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("blend: alpha must lie in [0, 1]");
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = std::clamp((1.0 - alpha) * x[i] + alpha * g[i], 0.0, 1.0);
  }
  return out;
}

double diversity_loss(const Tensor& sources, const Tensor& partners, const Tensor& triggers,
                      const Tensor& partner_triggers, double epsilon, DiversityGrad* grad) {
  const int B = sources.n();
  if (B == 0) throw DomainError("diversity_loss: empty batch");
  if (partners.n() != B || triggers.n() != B || partner_triggers.n() != B) {
    throw DomainError("diversity_loss: batch sizes differ");
  }
  if (!(sources.shape() == partners.shape()) || !(triggers.shape() == partner_triggers.shape())) {
    throw DomainError("diversity_loss: sample shapes differ");
  }
  if (grad) {
    grad->triggers = Tensor(triggers.shape());
    grad->partner_triggers = Tensor(triggers.shape());
  }
  double total = 0.0;
  for (int i = 0; i < B; ++i) {
    auto a = sources.sample(i), b = partners.sample(i);
    double num = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) num += (a[j] - b[j]) * (a[j] - b[j]);
    num = std::sqrt(num);
    auto g = triggers.sample(i), gp = partner_triggers.sample(i);
    double den = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) den += (g[j] - gp[j]) * (g[j] - gp[j]);
    den = std::sqrt(den);
    total += num / (den + epsilon);
    if (grad && den > 0.0) {
      // d/dg [num / (||g - g'|| + eps)] = -num / (den + eps)^2 * (g - g') / den
      const double coef = -num / ((den + epsilon) * (den + epsilon) * den * B);
      auto dg = grad->triggers.sample(i), dgp = grad->partner_triggers.sample(i);
      for (std::size_t j = 0; j < g.size(); ++j) {
        dg[j] = coef * (g[j] - gp[j]);
        dgp[j] = -dg[j];
      }
    }
  }
  return total / B;
}

double diversity_loss(nn::TriggerGenerator& generator, const Tensor& augmented,
                      const Tensor& augmented_partners, double epsilon) {
  if (augmented.n() == 0) throw DomainError("diversity_loss: empty batch");
  const Tensor g = generator.forward(augmented, nn::Mode::kEval);
  const Tensor gp = generator.forward(augmented_partners, nn::Mode::kEval);
  return diversity_loss(augmented, augmented_partners, g, gp, epsilon);
}

std::vector<std::vector<double>> backbone_features(nn::ResNetClassifier& model, const Tensor& images) {
  std::vector<std::vector<double>> out;
  if (images.n() == 0) return out;
  const Tensor f = model.features(images, nn::Mode::kEval);
  for (int i = 0; i < f.n(); ++i) {
    auto s = f.sample(i);
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

Tensor augment_for_backdoor(const selectors::SelectorHead& head, nn::ResNetClassifier& model,
                            const Tensor& images, const augment::Registry& registry, int q, Rng& rng) {
  if (q == 0 || images.n() == 0) return images;
  const auto feats = backbone_features(model, images);
  Tensor out(images.shape());
  for (int i = 0; i < images.n(); ++i) {
    const auto ops = selectors::choose_backdoor_ops(head, feats[static_cast<std::size_t>(i)], registry, q, rng);
    const Image aug = augment::apply_pipeline(registry, ops, image_from_tensor(images, i), rng);
    std::copy(aug.values().begin(), aug.values().end(), out.sample(i).begin());
  }
  return out;
}

BackdoorBatch make_backdoored_batch(std::span<const std::size_t> poison_indices,
                                    const data::LongTailDataset& ds, const data::PoisonPlan& plan,
                                    const selectors::SelectorHead& head, nn::ResNetClassifier& model,
                                    nn::TriggerGenerator& generator, const augment::Registry& registry,
                                    int q, double alpha, Rng& rng) {
  BackdoorBatch out;
  std::vector<const Image*> raw;
  for (std::size_t idx : poison_indices) {
    if (!plan.contains(idx)) {
      throw DomainError("make_backdoored_batch: sample " + std::to_string(idx) + " is not poisoned");
    }
    raw.push_back(&ds.image(idx));
    out.source_labels.push_back(ds.label(idx));
    out.labels.push_back(plan.eta(ds.label(idx)));
  }
  if (raw.empty()) return out;
  out.augmented = augment_for_backdoor(head, model, stack_images(raw), registry, q, rng);
  out.triggers = generate_trigger(generator, out.augmented);
  out.images = blend(out.augmented, out.triggers, alpha);
  return out;
}

PatchSpec PatchSpec::bottom_right(int size, int height, int width, PatchPattern pattern) {
  return PatchSpec{size, height - size, width - size, pattern};
}

Image apply_fixed_patch_trigger(const Image& image, const PatchSpec& patch) {
  if (patch.size < 0 || patch.top < 0 || patch.left < 0 || patch.top + patch.size > image.height() ||
      patch.left + patch.size > image.width()) {
    throw DomainError("fixed patch does not fit inside the image");
  }
  Image out = image;
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < patch.size; ++y) {
      for (int x = 0; x < patch.size; ++x) {
        double v = 0.0;
        switch (patch.pattern) {
          case PatchPattern::kCheckerboard:
            v = (x + y) % 2 == 0 ? 1.0 : 0.0;
            break;
          case PatchPattern::kWhite:
            v = 1.0;
            break;
          case PatchPattern::kBlack:
            v = 0.0;
            break;
        }
        out.at(c, patch.top + y, patch.left + x) = v;
      }
    }
  }
  return out;
}

Tensor apply_fixed_patch_trigger(const Tensor& images, const PatchSpec& patch) {
  Tensor out(images.shape());
  for (int i = 0; i < images.n(); ++i) {
    const Image im = apply_fixed_patch_trigger(image_from_tensor(images, i), patch);
    std::copy(im.values().begin(), im.values().end(), out.sample(i).begin());
  }
  return out;
}

}  // namespace ltb::trigger
