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

#include "ltb/nn/optim.hpp"

#include <cmath>

namespace ltb::nn {

Sgd::Sgd(std::vector<Param*> params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (const Param* p : params_) velocity_.emplace_back(p->value.size(), 0.0);
}

void Sgd::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j] + opts_.weight_decay * p.value[j];
      v[j] = opts_.momentum * v[j] + g;
      p.value[j] -= opts_.lr * v[j];
    }
  }
}

Adam::Adam(std::vector<Param*> params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (const Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g;
      v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g * g;
      p.value[j] -= opts_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opts_.eps);
    }
  }
}

}  // namespace ltb::nn
