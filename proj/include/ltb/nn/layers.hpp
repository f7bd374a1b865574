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

#include <memory>
#include <string>
#include <vector>

#include "ltb/rng.hpp"
#include "ltb/tensor.hpp"

namespace ltb::nn {

enum class Mode { kTrain, kEval };

/// Trainable parameter: flat values plus an accumulated gradient of equal size.
struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Layer with explicit forward/backward. forward() caches whatever backward()
/// needs, so each backward() pairs with the most recent forward().
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<Param*>& /*out*/) {}
  /// Non-trainable state that must survive checkpointing (running statistics).
  virtual void collect_buffers(std::vector<std::vector<double>*>& /*out*/) {}
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng,
         bool bias = true, std::string name = "conv");

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;

  int out_channels() const { return out_; }
  Param& weight() { return weight_; }

 private:
  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  Param weight_;
  Param bias_;
  void im2col(const double* img, int H, int W, double* col) const;
  void col2im(const double* col, int H, int W, double* img) const;

  Tensor input_;
  int out_h_ = 0, out_w_ = 0;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, std::string name = "bn");

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::vector<double>*>& out) override;

 private:
  int channels_;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Param gamma_;
  Param beta_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  Mode last_mode_ = Mode::kTrain;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor mask_;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor y_;
};

/// Fully connected layer over the flattened per-sample features.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng, std::string name = "fc");

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  const Param& weight() const { return weight_; }
  const Param& bias() const { return bias_; }

 private:
  int in_, out_;
  Param weight_;  // row-major [out][in]
  Param bias_;
  Tensor x_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Shape in_shape_{};
};

/// Nearest-neighbour 2x upsampling.
class Upsample2x final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Shape in_shape_{};
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::vector<double>*>& out) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Two 3x3 conv/BN stages with an identity or 1x1-projection shortcut.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(int in_channels, int out_channels, int stride, Rng& rng, const std::string& name);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::vector<double>*>& out) override;

 private:
  Sequential main_;
  Sequential shortcut_;  // empty for identity
  ReLU out_relu_;
};

/// Sum of all parameter sizes.
std::size_t parameter_count(const std::vector<Param*>& params);
void zero_grads(const std::vector<Param*>& params);

}  // namespace ltb::nn
