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

/// Stochastic gradient descent with momentum and L2 weight decay.
class Sgd {
 public:
  struct Options {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
  };

  Sgd(std::vector<Param*> params, Options opts);
  void step();
  void zero_grad() { zero_grads(params_); }
  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }

  std::vector<std::vector<double>>& state() { return velocity_; }

 private:
  std::vector<Param*> params_;
  Options opts_;
  std::vector<std::vector<double>> velocity_;
};

/// Adaptive moment estimation.
class Adam {
 public:
  struct Options {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<Param*> params, Options opts);
  void step();
  void zero_grad() { zero_grads(params_); }
  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }

  std::vector<std::vector<double>>& first_moment() { return m_; }
  std::vector<std::vector<double>>& second_moment() { return v_; }
  long long& step_count() { return t_; }

 private:
  std::vector<Param*> params_;
  Options opts_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long t_ = 0;
};

}  // namespace ltb::nn
