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

#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "ltb/errors.hpp"
#include "ltb/experiment.hpp"

using namespace ltb;
using namespace ltb::experiment;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_of(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

int line_count(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig quick() {
  auto c = testing::tiny_config();
  c.train_epochs = 2;
  return c;
}

}  // namespace

TEST_CASE("train writes a complete run directory") {
  testing::TempDir dir("exp_train");
  const auto cfg = quick();
  const auto r = cmd_train(cfg, dir.path);
  CHECK(r.epochs_done == 2);
  CHECK(r.config_hash == cfg.hash());
  for (const char* f : {"manifest.json", "config.cfg", "metrics.jsonl", "checkpoint.bin", "report.csv", "report.json"}) {
    CHECK_MESSAGE(fs::exists(dir.path / f), f);
  }
  const auto metrics = slurp(dir.path / "metrics.jsonl");
  CHECK(line_count(metrics) == 2);
  CHECK(count_of(metrics, cfg.hash()) == 2);
  CHECK(slurp(dir.path / "manifest.json").find(cfg.hash()) != std::string::npos);
  CHECK(slurp(dir.path / "report.csv").find(cfg.hash()) != std::string::npos);
  CHECK(load_run_config(dir.path).hash() == cfg.hash());
  CHECK(r.schedule.size() == 2);

  SUBCASE("refuses to overwrite") {
    CHECK_THROWS_AS(cmd_train(cfg, dir.path), ConfigError);
    CHECK(line_count(slurp(dir.path / "metrics.jsonl")) == 2);
  }
  SUBCASE("resume under another config is refused") {
    auto other = cfg;
    other.attack_alpha = 0.3;
    TrainOptions o;
    o.resume = true;
    CHECK_THROWS_AS(cmd_train(other, dir.path, o), ConfigError);
  }
}

TEST_CASE("interrupted and resumed train matches an uninterrupted one byte for byte") {
  testing::TempDir a("exp_full"), b("exp_resume");
  auto cfg = quick();
  cfg.train_epochs = 3;
  cmd_train(cfg, a.path);
  TrainOptions first;
  first.max_epochs = 1;
  CHECK(cmd_train(cfg, b.path, first).epochs_done == 1);
  CHECK_FALSE(fs::exists(b.path / "report.csv"));
  TrainOptions rest;
  rest.resume = true;
  CHECK(cmd_train(cfg, b.path, rest).epochs_done == 3);
  CHECK(slurp(a.path / "metrics.jsonl") == slurp(b.path / "metrics.jsonl"));
  CHECK(slurp(a.path / "report.csv") == slurp(b.path / "report.csv"));
}

TEST_CASE("plot a run: three figures, K schedule series and one tick per epoch") {
  testing::TempDir dir("exp_plot");
  const auto cfg = quick();
  cmd_train(cfg, dir.path);
  const auto files = cmd_plot(dir.path);
  REQUIRE(files.size() == 3);
  for (const auto& f : files) {
    CHECK(fs::file_size(f) > 0);
    CHECK(slurp(f).find(cfg.hash()) != std::string::npos);
  }
  const auto sched = slurp(dir.path / "schedule.svg");
  CHECK(count_of(sched, "class=\"series\"") == cfg.dataset_classes);
  CHECK(count_of(sched, "class=\"xtick\"") == cfg.train_epochs);
  CHECK(count_of(slurp(dir.path / "class_acc.svg"), "class=\"bar\"") == cfg.dataset_classes);

  // A metrics row stamped with another hash is refused.
  std::ofstream(dir.path / "metrics.jsonl", std::ios::app)
      << R"({"epoch":3,"config_hash":"0000000000000000"})" << "\n";
  CHECK_THROWS_AS(cmd_plot(dir.path), ConfigError);
  CHECK_THROWS_AS(cmd_plot(dir.path / "missing"), std::runtime_error);
}

TEST_CASE("sweep parsing") {
  const auto s = parse_sweep("alpha=0.01,0.05,0.1");
  CHECK(s.param == "alpha");
  CHECK(s.key == "attack.alpha");
  CHECK(s.values == std::vector<std::string>{"0.01", "0.05", "0.1"});
  CHECK(parse_sweep("q=1,2").key == "selector.q");
  CHECK(parse_sweep("T=1,2").key == "selector.temperature");
  CHECK(parse_sweep("rho=0,0.1").key == "attack.poison_rate");
  CHECK(parse_sweep("IR=10,50").key == "dataset.imbalance_ratio");
  CHECK(parse_sweep("selector.gamma=0.5").key == "selector.gamma");
  CHECK(sweep_params().size() == 8);
  CHECK_THROWS_AS(parse_sweep("epochs=1,2"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("alpha"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("alpha="), ConfigError);
  CHECK_THROWS_AS(parse_sweep("alpha=0.1,,0.2"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("alpha=0.1,0.1"), ConfigError);
}

TEST_CASE("ablate writes one child and one row per value, then plots") {
  testing::TempDir dir("exp_ablate");
  auto cfg = quick();
  cfg.train_epochs = 1;
  const auto r = cmd_ablate(cfg, parse_sweep("alpha=0.01,0.05,0.1"), dir.path);
  REQUIRE(r.runs.size() == 3);
  for (const char* v : {"alpha=0.01", "alpha=0.05", "alpha=0.1"}) CHECK(fs::exists(dir.path / v / "metrics.jsonl"));
  const auto csv = slurp(dir.path / "ablation.csv");
  CHECK(line_count(csv) == 4);
  CHECK(csv.rfind("param,value,ASR_All,", 0) == 0);
  const auto seed_of = [&](const char* v) { return load_run_config(dir.path / v).seed; };
  CHECK(seed_of("alpha=0.01") == seed_of("alpha=0.1"));
  CHECK(load_run_config(dir.path / "alpha=0.05").attack_alpha == 0.05);

  const auto figs = cmd_plot(dir.path);
  CHECK(figs.size() == 3);
  CHECK(count_of(slurp(dir.path / "sweep_asr.svg"), "class=\"series\"") == 3);

  CHECK_THROWS_AS(cmd_ablate(cfg, parse_sweep("q=1"), dir.path), ConfigError);

  // Moving a foreign run into the sweep breaks the hash chain.
  testing::TempDir stray("exp_stray");
  auto other = cfg;
  other.attack_alpha = 0.05;
  other.selector_gamma = 0.5;
  cmd_train(other, stray.path);
  fs::remove_all(dir.path / "alpha=0.05");
  fs::copy(stray.path, dir.path / "alpha=0.05", fs::copy_options::recursive);
  CHECK_THROWS_AS(cmd_plot(dir.path), ConfigError);
}

TEST_CASE("ablate validates every child before running") {
  testing::TempDir dir("exp_ablate_bad");
  CHECK_THROWS_AS(cmd_ablate(quick(), parse_sweep("alpha=0.1,2"), dir.path), ConfigError);
  CHECK_FALSE(fs::exists(dir.path / "alpha=0.1"));
}

TEST_CASE("render triggers writes a stamped PNG grid") {
  testing::TempDir dir("exp_render");
  auto cfg = quick();
  cfg.train_epochs = 1;
  cmd_train(cfg, dir.path);
  const auto png = cmd_render_triggers(dir.path, dir.path / "grid.png", 4);
  const auto bytes = slurp(png);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(1, 3) == "PNG");
  CHECK(bytes.find(cfg.hash()) != std::string::npos);
  CHECK_THROWS_AS(cmd_render_triggers(dir.path, dir.path / "x.png", 0), ConfigError);
}
