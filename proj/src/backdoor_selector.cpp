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

#include "ltb/backdoor_selector.hpp"

#include <algorithm>
#include <cmath>

#include "ltb/errors.hpp"
#include "ltb/nn/loss.hpp"

namespace ltb::selectors {

SelectorHead::SelectorHead(int feature_dim, int num_ops, double temperature, int strength)
    : feature_dim_(feature_dim),
      num_ops_(num_ops),
      temperature_(temperature),
      strength_(strength),
      weight_("selector.weight", static_cast<std::size_t>(feature_dim) * num_ops),
      bias_("selector.bias", static_cast<std::size_t>(num_ops)) {
  if (feature_dim < 1 || num_ops < 1) throw ConfigError("selector", "head needs positive sizes");
  if (!(temperature > 0.0)) throw ConfigError("selector.temperature", "must be positive");
  if (strength < 0) throw ConfigError("selector.q", "must be >= 0");
}

std::vector<double> SelectorHead::logits(std::span<const double> feature) const {
  if (static_cast<int>(feature.size()) != feature_dim_) {
    throw DomainError("selector head: expected feature dimension " + std::to_string(feature_dim_) +
                      ", got " + std::to_string(feature.size()));
  }
  std::vector<double> z(bias_.value);
  for (int i = 0; i < num_ops_; ++i) {
    const double* w = weight_.value.data() + static_cast<std::size_t>(i) * feature_dim_;
    for (int j = 0; j < feature_dim_; ++j) z[static_cast<std::size_t>(i)] += w[j] * feature[j];
  }
  return z;
}

std::vector<double> SelectorHead::probabilities(std::span<const double> feature) const {
  return nn::softmax(logits(feature), temperature_);
}

std::vector<double> predict_op_probabilities(const SelectorHead& head, std::span<const double> feature) {
  return head.probabilities(feature);
}

SelectorBatch build_selector_batch(nn::ResNetClassifier& model, const data::LongTailDataset& ds,
                                   std::span<const std::size_t> selector_set,
                                   const augment::Registry& registry, int q, Rng& rng) {
  const auto slice = registry.operations_at_strength(q);
  SelectorBatch b;
  b.feature_dim = model.feature_dim();
  b.num_ops = registry.size();
  const std::size_t n = selector_set.size();
  if (n == 0) return b;

  std::vector<Image> base, aug;
  base.reserve(n);
  aug.reserve(n * slice.operations.size());
  for (std::size_t idx : selector_set) {
    base.push_back(ds.image(idx));
    b.labels.push_back(ds.label(idx));
    for (const auto& op : slice.operations) {
      const augment::AugOperation single[1] = {op};
      aug.push_back(augment::apply_pipeline(registry, single, ds.image(idx), rng));
    }
  }
  const Tensor fb = model.features(stack_images(std::span<const Image>(base)), nn::Mode::kEval);
  b.base = fb.values();
  // Chunked so large selector sets do not allocate one huge im2col buffer.
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < aug.size(); start += chunk) {
    const std::size_t end = std::min(aug.size(), start + chunk);
    const Tensor fa = model.features(
        stack_images(std::span<const Image>(aug.data() + start, end - start)), nn::Mode::kEval);
    b.augmented.insert(b.augmented.end(), fa.values().begin(), fa.values().end());
  }
  return b;
}

double selector_loss(const SelectorHead& head, const SelectorBatch& batch, const nn::Linear& classifier,
                     SelectorGrad* grad) {
  const int d = batch.feature_dim;
  const int N = batch.num_ops;
  const int K = classifier.out_features();
  if (head.feature_dim() != d || head.num_ops() != N || classifier.in_features() != d) {
    throw DomainError("selector_loss: head, batch and classifier dimensions disagree");
  }
  const int B = batch.size();
  if (B == 0) throw DomainError("selector_loss: empty batch");
  if (grad) {
    grad->weight.assign(head.weight().value.size(), 0.0);
    grad->bias.assign(head.bias().value.size(), 0.0);
  }
  const auto& wc = classifier.weight().value;  // [K][d]
  const auto& bc = classifier.bias().value;
  const double T = head.temperature();

  double total = 0.0;
  std::vector<double> agg(static_cast<std::size_t>(d)), logits(static_cast<std::size_t>(K));
  std::vector<double> dagg(static_cast<std::size_t>(d)), g(static_cast<std::size_t>(N));
  for (int b = 0; b < B; ++b) {
    std::span<const double> f0(batch.base.data() + static_cast<std::size_t>(b) * d, static_cast<std::size_t>(d));
    const double* fa = batch.augmented.data() + static_cast<std::size_t>(b) * N * d;
    const auto p = head.probabilities(f0);

    std::fill(agg.begin(), agg.end(), 0.0);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < d; ++j) agg[static_cast<std::size_t>(j)] += p[static_cast<std::size_t>(i)] * fa[i * d + j];
    }
    for (int k = 0; k < K; ++k) {
      double z = bc[static_cast<std::size_t>(k)];
      for (int j = 0; j < d; ++j) z += wc[static_cast<std::size_t>(k) * d + j] * agg[static_cast<std::size_t>(j)];
      logits[static_cast<std::size_t>(k)] = z;
    }
    const auto sm = nn::softmax(logits);
    const int y = batch.labels[static_cast<std::size_t>(b)];
    total += -std::log(std::max(sm[static_cast<std::size_t>(y)], 1e-300));
    if (!grad) continue;

    // Backward through f', the weighted sum and the temperature softmax.
    std::fill(dagg.begin(), dagg.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      const double dl = (sm[static_cast<std::size_t>(k)] - (k == y ? 1.0 : 0.0)) / B;
      for (int j = 0; j < d; ++j) dagg[static_cast<std::size_t>(j)] += wc[static_cast<std::size_t>(k) * d + j] * dl;
    }
    double pg = 0.0;
    for (int i = 0; i < N; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += fa[i * d + j] * dagg[static_cast<std::size_t>(j)];
      g[static_cast<std::size_t>(i)] = s;
      pg += p[static_cast<std::size_t>(i)] * s;
    }
    for (int i = 0; i < N; ++i) {
      const double dz = p[static_cast<std::size_t>(i)] * (g[static_cast<std::size_t>(i)] - pg) / T;
      grad->bias[static_cast<std::size_t>(i)] += dz;
      for (int j = 0; j < d; ++j) grad->weight[static_cast<std::size_t>(i) * d + j] += dz * f0[static_cast<std::size_t>(j)];
    }
  }
  return total / B;
}

double selector_loss(const SelectorHead& head, nn::ResNetClassifier& model,
                     const data::LongTailDataset& ds, std::span<const std::size_t> selector_set,
                     const augment::Registry& registry, int q, Rng& rng) {
  const auto batch = build_selector_batch(model, ds, selector_set, registry, q, rng);
  return selector_loss(head, batch, model.head());
}

std::vector<double> train_selector_head(SelectorHead& head, nn::Adam& optimizer,
                                        const SelectorBatch& batch, const nn::Linear& classifier,
                                        int steps) {
  std::vector<double> losses;
  if (batch.size() == 0) return losses;
  SelectorGrad grad;
  for (int s = 0; s < steps; ++s) {
    losses.push_back(selector_loss(head, batch, classifier, &grad));
    head.weight().grad = grad.weight;
    head.bias().grad = grad.bias;
    optimizer.step();
  }
  losses.push_back(selector_loss(head, batch, classifier));
  return losses;
}

std::vector<augment::AugOperation> choose_backdoor_ops(const SelectorHead& head,
                                                       std::span<const double> feature,
                                                       const augment::Registry& registry, int q,
                                                       Rng& rng) {
  if (q < 0) throw ConfigError("selector.q", "must be >= 0");
  if (q > registry.size()) {
    throw ConfigError("selector.q", "q=" + std::to_string(q) + " exceeds the number of operators (" +
                                        std::to_string(registry.size()) + ")");
  }
  if (q == 0) return {};
  auto probs = head.probabilities(feature);
  const auto slice = registry.operations_at_strength(q);
  std::vector<augment::AugOperation> out;
  std::vector<bool> taken(probs.size(), false);
  for (int draw = 0; draw < q; ++draw) {
    double remaining = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) remaining += taken[i] ? 0.0 : probs[i];
    if (!(remaining > 0.0)) {
      // Every untaken probability underflowed: fall back to uniform.
      for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = taken[i] ? 0.0 : 1.0;
    }
    const std::size_t i = rng.categorical(probs);
    out.push_back(slice.operations[i]);
    taken[i] = true;
    probs[i] = 0.0;
  }
  return out;
}

}  // namespace ltb::selectors
