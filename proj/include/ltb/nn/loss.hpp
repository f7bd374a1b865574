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

#include "ltb/tensor.hpp"

namespace ltb::nn {

/// Numerically stable softmax of one logit row, divided by temperature first.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

/// Mean cross-entropy over the rows of `logits` ([N, K, 1, 1]).
///
/// When `grad` is non-null it receives dLoss/dlogits scaled by `grad_scale`.
double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad = nullptr,
                     double grad_scale = 1.0);

/// Index of the largest entry in row `i`.
int argmax_row(const Tensor& logits, int i);

}  // namespace ltb::nn
