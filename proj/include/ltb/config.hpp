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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ltb {

/// Every experiment knob. Text form is flat `section.key = value` lines.
struct ExperimentConfig {
  // dataset
  std::string dataset_source = "synthetic";  // synthetic | packed | folder
  std::string dataset_train_path;
  std::string dataset_test_path;
  int dataset_classes = 10;
  double dataset_imbalance_ratio = 50.0;
  int dataset_n_max = 500;
  std::string dataset_profile = "exponential";
  int dataset_channels = 3;
  int dataset_size = 16;             // synthetic only
  int dataset_test_per_class = 100;  // synthetic only
  double dataset_noise = 0.06;       // synthetic only

  // attack
  double attack_poison_rate = 0.1;
  double attack_alpha = 0.1;
  int attack_target_label = 0;
  double attack_lambda_div = 0.01;
  double attack_epsilon = 1e-6;
  std::string attack_trigger = "generator";  // generator | patch
  int attack_patch_size = 3;

  // augmentation / selectors
  std::vector<std::string> augment_operators;  // empty = default table
  int augment_s_max = 10;
  int selector_q = 1;
  double selector_temperature = 1.0;
  double selector_gamma = 0.6;
  int selector_dt_per_class = 10;
  int selector_head_steps = 50;
  double selector_head_lr = 0.01;
  double selector_clean_aug_prob = 0.5;

  // training
  int train_epochs = 20;
  int train_batch_size = 64;
  double train_lr = 0.01;
  double train_momentum = 0.9;
  double train_weight_decay = 5e-4;
  double train_generator_lr = 0.01;
  double train_logit_adjust_tau = 0.0;
  std::string train_lr_schedule = "constant";  // constant | cosine
  std::vector<int> model_widths{16, 32, 64};
  std::vector<int> generator_widths{16, 32, 32, 32};

  std::uint64_t seed = 0;
  /// Output location; not part of the canonical form or hash.
  std::string out_dir;

  /// Parses `key = value` lines ('#' comments). Unknown keys and malformed
  /// values raise ConfigError naming the field.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Sets one key from its text value (same validation as parse).
  void set(const std::string& key, const std::string& value);
  /// Applies LTB_<KEY> environment overrides (dots become underscores,
  /// upper-cased, e.g. LTB_TRAIN_EPOCHS).
  void apply_env_overrides();

  /// Sorted key = value lines with normalized numerics, excluding out_dir.
  std::string canonical() const;
  /// 16 hex digits (FNV-1a 64 of the canonical form).
  std::string hash() const;
  std::map<std::string, std::string> to_map() const;

  /// Cross-field validation; throws ConfigError naming the first bad field.
  void validate() const;

  static const std::vector<std::string>& keys();
  static std::string env_name(const std::string& key);
};

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

}  // namespace ltb
