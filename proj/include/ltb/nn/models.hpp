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

#include <vector>

#include "ltb/nn/layers.hpp"

namespace ltb::nn {

struct ClassifierSpec {
  int in_channels = 3;
  int num_classes = 10;
  /// Output width of each residual stage. Stages after the first downsample by 2.
  std::vector<int> stage_widths{16, 32, 64};
};

/// Small residual classifier split into a feature backbone and a final FC layer.
class ResNetClassifier {
 public:
  ResNetClassifier(const ClassifierSpec& spec, Rng& rng);

  /// Backbone output (all layers except the last FC): [N, d, 1, 1].
  Tensor features(const Tensor& x, Mode mode);
  /// Final FC layer applied to backbone features.
  Tensor classify(const Tensor& features, Mode mode);
  Tensor forward(const Tensor& x, Mode mode);

  /// Backpropagates through head and backbone; returns dLoss/dinput.
  Tensor backward(const Tensor& grad_logits);

  int feature_dim() const { return spec_.stage_widths.back(); }
  int num_classes() const { return spec_.num_classes; }
  const ClassifierSpec& spec() const { return spec_; }
  Linear& head() { return *fc_; }
  const Linear& head() const { return *fc_; }

  std::vector<Param*> params();
  std::vector<std::vector<double>*> buffers();

 private:
  ClassifierSpec spec_;
  Sequential backbone_;
  std::unique_ptr<Linear> fc_;
};

struct GeneratorSpec {
  int channels = 3;
  int height = 16;
  int width = 16;
  /// Width of the stem followed by one width per downsampling stage.
  std::vector<int> widths{16, 32, 32, 32};
};

/// Encoder-decoder producing a same-shape image in [0, 1] (sigmoid output).
class TriggerGenerator {
 public:
  TriggerGenerator(const GeneratorSpec& spec, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode = Mode::kEval);
  /// Accumulates parameter gradients; returns dLoss/dinput.
  Tensor backward(const Tensor& grad_out);

  const GeneratorSpec& spec() const { return spec_; }
  int stages() const { return static_cast<int>(spec_.widths.size()) - 1; }
  std::vector<Param*> params();

 private:
  GeneratorSpec spec_;
  Sequential net_;
};

}  // namespace ltb::nn
