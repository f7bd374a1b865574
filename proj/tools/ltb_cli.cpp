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

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ltb/config.hpp"
#include "ltb/errors.hpp"
#include "ltb/experiment.hpp"

namespace {

using namespace ltb;
using experiment::ExitCode;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  bool resume = false;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config_path);
  cfg.apply_env_overrides();
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set", "expected key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (cfg.out_dir.empty()) throw ConfigError("out_dir", "no output directory (use --out or out_dir)");
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run seed (overrides the config)");
  cmd->add_option("--out,-o", c.out, "output directory (overrides out_dir)");
  cmd->add_option("--set", c.sets, "extra key=value overrides, applied after the environment");
  cmd->add_flag("--resume", c.resume, "continue an interrupted run from its checkpoint");
  cmd->add_flag("--quiet,-q", c.quiet, "no per-epoch progress");
}

experiment::Logger logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& line) { std::cerr << line << std::endl; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tailed backdoor attack experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ltb 0.1.0");
  app.footer("Any config key can also be set through the environment: LTB_<KEY>, e.g. LTB_TRAIN_EPOCHS=5.\n"
             "Exit codes: 0 success, 1 runtime error, 2 invalid configuration or arguments.");

  Common train_opts;
  auto* train = app.add_subcommand("train", "train one attacked (or control) model");
  add_common(train, train_opts);
  int max_epochs = 0;
  train->add_option("--max-epochs", max_epochs, "stop after this many epochs in this invocation");

  Common ablate_opts;
  std::string sweep_text;
  auto* ablate = app.add_subcommand("ablate", "one child run per value of a swept parameter");
  add_common(ablate, ablate_opts);
  ablate->add_option("--sweep", sweep_text, "param=v1,v2,... (q, T, alpha, lambda_div, rho, gamma, target_label, IR)")
      ->required();

  std::string plot_dir, plot_out;
  auto* plot = app.add_subcommand("plot", "SVG figures for a run or sweep directory");
  plot->add_option("dir", plot_dir, "run or sweep directory")->required();
  plot->add_option("--out,-o", plot_out, "figure directory (default: the input directory)");

  std::string render_dir, render_out;
  int render_count = 8;
  auto* render = app.add_subcommand("render-triggers", "PNG grid of clean / trigger / backdoored test images");
  render->add_option("run", render_dir, "run directory with a checkpoint")->required();
  render->add_option("--out,-o", render_out, "output PNG (default: <run>/triggers.png)");
  render->add_option("--count,-n", render_count, "number of test images")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ExitCode::kOk : ExitCode::kValidationError;
  }

  try {
    if (*train) {
      const auto cfg = resolve_config(train_opts);
      experiment::TrainOptions opts{train_opts.resume, max_epochs, logger(train_opts)};
      const auto r = experiment::cmd_train(cfg, cfg.out_dir, opts);
      std::cout << r.dir.string() << "\n";
    } else if (*ablate) {
      const auto cfg = resolve_config(ablate_opts);
      const auto sweep = experiment::parse_sweep(sweep_text);
      experiment::TrainOptions opts{ablate_opts.resume, 0, logger(ablate_opts)};
      const auto r = experiment::cmd_ablate(cfg, sweep, cfg.out_dir, opts);
      std::cout << (r.dir / "ablation.csv").string() << "\n";
    } else if (*plot) {
      for (const auto& p : experiment::cmd_plot(plot_dir, plot_out)) std::cout << p.string() << "\n";
    } else if (*render) {
      std::cout << experiment::cmd_render_triggers(render_dir, render_out, render_count).string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::kRuntimeError;
  }
  return ExitCode::kOk;
}
