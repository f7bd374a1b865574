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

#include "ltb/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ltb/errors.hpp"

namespace ltb::nn {

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("softmax: temperature must be positive");
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad,
                     double grad_scale) {
  const int N = logits.n();
  const int K = static_cast<int>(logits.shape().sample_size());
  if (static_cast<int>(labels.size()) != N) throw DomainError("cross_entropy: label count mismatch");
  if (N == 0) throw DomainError("cross_entropy: empty batch");
  if (grad) *grad = Tensor(logits.shape());
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= K) throw DomainError("cross_entropy: label out of range");
    auto row = logits.sample(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    total += log_z - row[y];
    if (grad) {
      auto g = grad->sample(i);
      for (int k = 0; k < K; ++k) {
        g[k] = grad_scale * (std::exp(row[k] - log_z) - (k == y ? 1.0 : 0.0)) / N;
      }
    }
  }
  return total / N;
}

int argmax_row(const Tensor& logits, int i) {
  auto row = logits.sample(i);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace ltb::nn
