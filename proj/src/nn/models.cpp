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

#include "ltb/nn/models.hpp"

#include "ltb/errors.hpp"

namespace ltb::nn {

ResNetClassifier::ResNetClassifier(const ClassifierSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.stage_widths.empty()) throw ConfigError("model.widths", "at least one stage required");
  if (spec.num_classes < 2) throw ConfigError("dataset.classes", "need at least two classes");
  const int stem = spec.stage_widths.front();
  backbone_.add<Conv2d>(spec.in_channels, stem, 3, 1, 1, rng, false, "stem.conv");
  backbone_.add<BatchNorm2d>(stem, "stem.bn");
  backbone_.add<ReLU>();
  int in = stem;
  for (std::size_t s = 0; s < spec.stage_widths.size(); ++s) {
    const int out = spec.stage_widths[s];
    backbone_.add<ResidualBlock>(in, out, s == 0 ? 1 : 2, rng, "stage" + std::to_string(s + 1));
    in = out;
  }
  backbone_.add<GlobalAvgPool>();
  fc_ = std::make_unique<Linear>(in, spec.num_classes, rng, "fc");
}

Tensor ResNetClassifier::features(const Tensor& x, Mode mode) {
  if (x.c() != spec_.in_channels) throw DomainError("classifier: channel mismatch");
  return backbone_.forward(x, mode);
}

Tensor ResNetClassifier::classify(const Tensor& features, Mode mode) {
  return fc_->forward(features, mode);
}

Tensor ResNetClassifier::forward(const Tensor& x, Mode mode) {
  return classify(features(x, mode), mode);
}

Tensor ResNetClassifier::backward(const Tensor& grad_logits) {
  return backbone_.backward(fc_->backward(grad_logits));
}

std::vector<Param*> ResNetClassifier::params() {
  std::vector<Param*> out;
  backbone_.collect_params(out);
  fc_->collect_params(out);
  return out;
}

std::vector<std::vector<double>*> ResNetClassifier::buffers() {
  std::vector<std::vector<double>*> out;
  backbone_.collect_buffers(out);
  return out;
}

TriggerGenerator::TriggerGenerator(const GeneratorSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.widths.empty()) throw ConfigError("generator.widths", "at least a stem width required");
  const int n_stages = static_cast<int>(spec.widths.size()) - 1;
  const int div = 1 << n_stages;
  if (spec.height % div != 0 || spec.width % div != 0) {
    throw ConfigError("generator.widths",
                      "image size must be divisible by 2^stages (" + std::to_string(div) + ")");
  }
  net_.add<Conv2d>(spec.channels, spec.widths[0], 3, 1, 1, rng, true, "enc0");
  net_.add<ReLU>();
  for (int s = 1; s <= n_stages; ++s) {
    net_.add<Conv2d>(spec.widths[s - 1], spec.widths[s], 3, 2, 1, rng, true,
                     "enc" + std::to_string(s));
    net_.add<ReLU>();
  }
  for (int s = n_stages; s >= 1; --s) {
    net_.add<Upsample2x>();
    net_.add<Conv2d>(spec.widths[s], spec.widths[s - 1], 3, 1, 1, rng, true,
                     "dec" + std::to_string(s));
    net_.add<ReLU>();
  }
  net_.add<Conv2d>(spec.widths[0], spec.channels, 3, 1, 1, rng, true, "out");
  net_.add<Sigmoid>();
}

Tensor TriggerGenerator::forward(const Tensor& x, Mode mode) {
  if (x.c() != spec_.channels || x.h() != spec_.height || x.w() != spec_.width) {
    throw DomainError("trigger generator: expected input " + std::to_string(spec_.channels) + "x" +
                      std::to_string(spec_.height) + "x" + std::to_string(spec_.width) + ", got " +
                      x.shape().str());
  }
  return net_.forward(x, mode);
}

Tensor TriggerGenerator::backward(const Tensor& grad_out) { return net_.backward(grad_out); }

std::vector<Param*> TriggerGenerator::params() {
  std::vector<Param*> out;
  net_.collect_params(out);
  return out;
}

}  // namespace ltb::nn
