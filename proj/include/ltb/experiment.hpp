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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ltb/config.hpp"
#include "ltb/metrics.hpp"

namespace ltb::experiment {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kValidationError = 2 };

using Logger = std::function<void(const std::string&)>;

struct TrainOptions {
  /// Continue from <out>/checkpoint.bin instead of refusing a non-empty directory.
  bool resume = false;
  /// Stop after this many epochs in this invocation (0 = run to completion).
  int max_epochs = 0;
  Logger log;
};

struct RunResult {
  fs::path dir;
  std::string config_hash;
  metrics::MetricsReport final_report;
  std::vector<std::vector<int>> schedule;  // per epoch, after the update
  int epochs_done = 0;
};

/// Runs fit() into `out`, writing manifest.json, config.cfg, metrics.jsonl,
/// checkpoint.bin, report.csv and report.json. Refuses a non-empty `out`
/// unless resuming (ConfigError naming out_dir).
RunResult cmd_train(const ExperimentConfig& config, const fs::path& out, const TrainOptions& opts = {});

struct SweepSpec {
  std::string param;  // name as given
  std::string key;    // config key it maps to
  std::vector<std::string> values;
};

/// Parses "param=v1,v2,...". Accepted names: q, T, alpha, lambda_div, rho,
/// gamma, target_label, IR (or the config keys they stand for).
SweepSpec parse_sweep(const std::string& text);
const std::vector<std::string>& sweep_params();

struct SweepResult {
  fs::path dir;
  std::string base_hash;
  std::vector<std::string> values;
  std::vector<RunResult> runs;
};

/// One child run per value (same seed) under `out`/<param>=<value>, plus
/// sweep.json and ablation.csv.
SweepResult cmd_ablate(const ExperimentConfig& base, const SweepSpec& sweep, const fs::path& out,
                       const TrainOptions& opts = {});

/// Figures for a run directory (class_acc.svg, class_asr.svg, schedule.svg)
/// or a sweep directory (sweep_asr.svg, sweep_acc.svg, sweep_groups.svg).
/// Throws ConfigError when config hashes disagree, std::runtime_error when
/// metrics are missing.
std::vector<fs::path> cmd_plot(const fs::path& dir, const fs::path& out = {});

/// Grid PNG: one column per test image, rows = clean, trigger, backdoored.
fs::path cmd_render_triggers(const fs::path& run_dir, const fs::path& out, int count = 8);

/// Reads the "key = value" config stored in a run directory.
ExperimentConfig load_run_config(const fs::path& run_dir);

}  // namespace ltb::experiment
