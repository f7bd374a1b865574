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

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ltb/config.hpp"
#include "ltb/rng.hpp"
#include "ltb/tensor.hpp"

namespace testing {

inline ltb::Tensor random_tensor(ltb::Shape s, ltb::Rng& rng, double lo = 0.0, double hi = 1.0) {
  ltb::Tensor t(s);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline ltb::Image random_image(int c, int h, int w, ltb::Rng& rng) {
  ltb::Image im(c, h, w);
  for (double& v : im.values()) v = rng.uniform();
  return im;
}

/// Adds uniform noise to every parameter so no ReLU input sits exactly on
/// the kink (zero-initialised biases over dead units would).
template <typename Params>
inline void jitter(const Params& params, ltb::Rng& rng, double scale = 0.1) {
  for (auto* p : params) {
    for (double& v : p->value) v += rng.uniform(-scale, scale);
  }
}

/// Central difference of f at x along coordinate i of `v`.
inline double central_difference(std::vector<double>& v, std::size_t i, double h,
                                 const std::function<double()>& f) {
  const double keep = v[i];
  v[i] = keep + h;
  const double up = f();
  v[i] = keep - h;
  const double down = f();
  v[i] = keep;
  return (up - down) / (2 * h);
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Small synthetic run: 8x8 images, tiny networks, a few seconds per epoch.
inline ltb::ExperimentConfig tiny_config() {
  ltb::ExperimentConfig c;
  c.dataset_n_max = 40;
  c.dataset_imbalance_ratio = 4;
  c.dataset_size = 8;
  c.dataset_test_per_class = 6;
  c.dataset_classes = 6;
  c.model_widths = {4, 8};
  c.generator_widths = {4, 4};
  c.train_batch_size = 16;
  c.train_epochs = 2;
  c.selector_dt_per_class = 4;
  c.selector_head_steps = 5;
  c.attack_poison_rate = 0.2;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("ltb_test_" + name)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace testing
