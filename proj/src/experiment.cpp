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

#include "ltb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ltb/dataset.hpp"
#include "ltb/errors.hpp"
#include "ltb/plot.hpp"
#include "ltb/training.hpp"

namespace ltb::experiment {

using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kConfig = "config.cfg";
constexpr const char* kMetrics = "metrics.jsonl";
constexpr const char* kCheckpoint = "checkpoint.bin";
constexpr const char* kSweep = "sweep.json";

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::vector<json> read_metrics(const fs::path& p) {
  std::vector<json> rows;
  if (!fs::exists(p)) return rows;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception&) {
      break;  // torn final line after a crash
    }
  }
  return rows;
}

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

json class_report_json(const metrics::ClassReport& r) {
  return {{"all", r.groups.all},
          {"many", r.groups.many},
          {"medium", r.groups.medium},
          {"few", r.groups.few},
          {"per_class", r.per_class},
          {"samples", r.samples}};
}

json split_json(const metrics::GroupSplit& s) { return {{"many", s.many}, {"medium", s.medium}, {"few", s.few}}; }

json metrics_row(const training::EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"config_hash", r.report.config_hash},
          {"target_label", r.report.target_label},
          {"loss",
           {{"clean", r.losses.clean},
            {"backdoor", r.losses.backdoor},
            {"diversity", r.losses.diversity},
            {"total", r.losses.total}}},
          {"batches", r.batches},
          {"selector",
           {{"loss_before", r.selector_loss_before},
            {"loss_after", r.selector_loss_after},
            {"class_acc", r.selector_class_acc}}},
          {"schedule", r.schedule},
          {"acc", class_report_json(r.report.acc)},
          {"asr", class_report_json(r.report.asr)}};
}

metrics::ClassReport class_report_from(const json& j) {
  metrics::ClassReport r;
  for (const auto& v : j.at("per_class")) r.per_class.push_back(v.is_null() ? std::nan("") : v.get<double>());
  r.samples = j.at("samples").get<std::vector<int>>();
  r.groups = {j.at("all").get<double>(), j.at("many").get<double>(), j.at("medium").get<double>(),
              j.at("few").get<double>()};
  return r;
}

std::string attack_name(const ExperimentConfig& c) {
  if (c.attack_poison_rate <= 0.0) return "clean";
  return c.attack_trigger;
}

json manifest_json(const ExperimentConfig& cfg, const training::Datasets& ds, const json& extra) {
  json m;
  m["config_hash"] = cfg.hash();
  m["config"] = cfg.to_map();
  m["seed"] = cfg.seed;
  m["dataset"] = {{"source", cfg.dataset_source},
                  {"train_size", ds.train.size()},
                  {"test_size", ds.test.size()},
                  {"profile", cfg.dataset_profile},
                  {"counts", ds.train.counts()},
                  {"imbalance_ratio", ds.train.imbalance_ratio()},
                  {"realised_imbalance_ratio", ds.train.realised_imbalance_ratio()}};
  m["poison"] = {{"rate", ds.plan.rate},
                 {"target_label", ds.plan.target_label},
                 {"count", ds.plan.poison_indices.size()},
                 {"per_class", ds.plan.per_class(ds.train)},
                 {"indices", ds.plan.poison_indices}};
  m["groups"] = split_json(ds.split);
  m["operators"] = ds.registry->names();
  m["s_max"] = ds.registry->s_max();
  if (!extra.is_null()) m["sweep"] = extra;
  return m;
}

void write_reports(const fs::path& dir, const ExperimentConfig& cfg, const metrics::MetricsReport& rep,
                   const metrics::GroupSplit& split) {
  write_text(dir / "report.csv", metrics::report_csv(rep, split, attack_name(cfg)));
  json j = {{"config_hash", rep.config_hash},
            {"epoch", rep.epoch},
            {"attack", attack_name(cfg)},
            {"target_label", rep.target_label},
            {"target_group", split.group_of(rep.target_label)},
            {"groups", split_json(split)},
            {"acc", class_report_json(rep.acc)},
            {"asr", class_report_json(rep.asr)}};
  write_text(dir / "report.json", j.dump(2) + "\n");
}

std::string log_line(const training::EpochRecord& r) {
  std::ostringstream o;
  o.precision(4);
  o << "epoch " << r.epoch << " loss " << r.losses.total << " ACC " << r.report.acc.groups.all << " ASR "
    << r.report.asr.groups.all << " (few " << r.report.asr.groups.few << ")";
  return o.str();
}

RunResult train_impl(const ExperimentConfig& config, const fs::path& out, const TrainOptions& opts,
                     const json& sweep_info) {
  ExperimentConfig cfg = config;
  cfg.out_dir = out.string();
  cfg.validate();
  if (out.empty()) throw ConfigError("out_dir", "output directory is required");
  const fs::path ckpt = out / kCheckpoint;
  const bool resuming = opts.resume && fs::exists(ckpt);
  if (!resuming && non_empty_dir(out)) {
    throw ConfigError("out_dir", out.string() + " exists and is not empty; refusing to overwrite (use --resume)");
  }

  const training::Datasets ds = training::prepare_datasets(cfg);
  training::RunState state;
  if (resuming) {
    const json m = read_json(out / kManifest);
    if (m.at("config_hash").get<std::string>() != cfg.hash()) {
      throw ConfigError("config", "run directory was created with config " + m.at("config_hash").get<std::string>() +
                                      ", current config is " + cfg.hash());
    }
    state = training::load_checkpoint(ckpt, cfg, ds);
    // Drop rows written after the last checkpoint.
    auto rows = read_metrics(out / kMetrics);
    std::string kept;
    for (const auto& row : rows) {
      if (row.at("epoch").get<int>() <= state.epoch) kept += row.dump() + "\n";
    }
    write_text(out / kMetrics, kept);
  } else {
    fs::create_directories(out);
    write_text(out / kConfig, cfg.canonical());
    write_text(out / kManifest, manifest_json(cfg, ds, sweep_info).dump(2) + "\n");
    write_text(out / kMetrics, "");
    state = training::init_state(cfg, ds);
  }

  int ran = 0;
  while (state.epoch < cfg.train_epochs && (opts.max_epochs <= 0 || ran < opts.max_epochs)) {
    const auto& rec = training::run_epoch(state, ds);
    {
      std::ofstream m(out / kMetrics, std::ios::binary | std::ios::app);
      m << metrics_row(rec).dump() << "\n";
      if (!m) throw std::runtime_error("cannot append metrics");
    }
    training::save_checkpoint(state, ckpt);
    if (opts.log) opts.log(log_line(rec));
    ++ran;
  }

  RunResult result;
  result.dir = out;
  result.config_hash = cfg.hash();
  result.epochs_done = state.epoch;
  for (const auto& row : read_metrics(out / kMetrics)) {
    result.schedule.push_back(row.at("schedule").get<std::vector<int>>());
  }
  if (state.epoch == cfg.train_epochs) {
    if (!state.history.empty()) {
      result.final_report = state.history.back().report;
    } else {
      result.final_report = training::evaluate(state, ds);
    }
    write_reports(out, cfg, result.final_report, ds.split);
  }
  return result;
}

const std::map<std::string, std::string>& sweep_aliases() {
  static const std::map<std::string, std::string> m = {
      {"q", "selector.q"},
      {"T", "selector.temperature"},
      {"alpha", "attack.alpha"},
      {"lambda_div", "attack.lambda_div"},
      {"rho", "attack.poison_rate"},
      {"gamma", "selector.gamma"},
      {"target_label", "attack.target_label"},
      {"IR", "dataset.imbalance_ratio"},
  };
  return m;
}

double parse_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return std::nan("");
  }
}

void write_svg(const fs::path& p, const std::string& svg, std::vector<fs::path>& written) {
  write_text(p, svg);
  written.push_back(p);
}

std::vector<fs::path> plot_run(const fs::path& dir, const fs::path& out) {
  const json manifest = read_json(dir / kManifest);
  const std::string hash = manifest.at("config_hash").get<std::string>();
  const auto rows = read_metrics(dir / kMetrics);
  if (rows.empty()) throw std::runtime_error("no metrics rows in " + (dir / kMetrics).string());
  for (const auto& r : rows) {
    if (r.at("config_hash").get<std::string>() != hash) {
      throw ConfigError("config_hash", "metrics row for epoch " + std::to_string(r.at("epoch").get<int>()) +
                                           " has hash " + r.at("config_hash").get<std::string>() +
                                           ", manifest has " + hash);
    }
  }
  metrics::GroupSplit split;
  split.many = manifest.at("groups").at("many").get<std::vector<int>>();
  split.medium = manifest.at("groups").at("medium").get<std::vector<int>>();
  split.few = manifest.at("groups").at("few").get<std::vector<int>>();
  const int K = split.num_classes();
  std::vector<std::string> labels;
  std::vector<int> groups;
  for (int k = 0; k < K; ++k) {
    labels.push_back(std::to_string(k));
    const auto g = split.group_of(k);
    groups.push_back(g == "many" ? 0 : g == "medium" ? 1 : 2);
  }
  const json& last = rows.back();
  const std::string note = "config " + hash;
  const int epoch = last.at("epoch").get<int>();
  std::vector<fs::path> written;
  fs::create_directories(out);

  const auto acc = class_report_from(last.at("acc"));
  plot::Axes a{"Class-wise clean accuracy (epoch " + std::to_string(epoch) + ")", "class", "ACC", {}, 0.0, 1.0};
  write_svg(out / "class_acc.svg", plot::bar_chart(a, labels, acc.per_class, groups, note), written);

  const auto asr = class_report_from(last.at("asr"));
  a.title = "Class-wise attack success rate (epoch " + std::to_string(epoch) + ", target " +
            std::to_string(last.at("target_label").get<int>()) + ")";
  a.y_label = "ASR";
  write_svg(out / "class_asr.svg", plot::bar_chart(a, labels, asr.per_class, groups, note), written);

  std::vector<plot::Series> series(static_cast<std::size_t>(K));
  plot::Axes s{"Augmentation strength per class", "epoch", "s(k)", {}, 0.0,
               manifest.at("s_max").get<double>()};
  for (const auto& r : rows) {
    const double e = r.at("epoch").get<double>();
    s.x_ticks.push_back(e);
    const auto sched = r.at("schedule").get<std::vector<int>>();
    for (int k = 0; k < K; ++k) {
      series[static_cast<std::size_t>(k)].x.push_back(e);
      series[static_cast<std::size_t>(k)].y.push_back(sched.at(static_cast<std::size_t>(k)));
    }
  }
  for (int k = 0; k < K; ++k) series[static_cast<std::size_t>(k)].label = "class " + std::to_string(k);
  write_svg(out / "schedule.svg", plot::line_chart(s, series, note), written);
  return written;
}

std::vector<fs::path> plot_sweep(const fs::path& dir, const fs::path& out) {
  const json sweep = read_json(dir / kSweep);
  const std::string base = sweep.at("base_hash").get<std::string>();
  const std::string param = sweep.at("param").get<std::string>();
  std::vector<plot::Series> asr_curves, acc_curves;
  std::vector<plot::Series> groups(4);
  const char* group_names[] = {"All", "Many", "Medium", "Few"};
  const char* group_keys[] = {"all", "many", "medium", "few"};
  for (int g = 0; g < 4; ++g) groups[static_cast<std::size_t>(g)].label = std::string("ASR ") + group_names[g];
  plot::Axes ga{"Final ASR vs " + param, param, "ASR", {}, 0.0, 1.0};
  int max_epoch = 0;
  for (const auto& child : sweep.at("children")) {
    const fs::path cdir = dir / child.at("dir").get<std::string>();
    const std::string value = child.at("value").get<std::string>();
    const json m = read_json(cdir / kManifest);
    const std::string chash = m.at("config_hash").get<std::string>();
    if (!m.contains("sweep") || m.at("sweep").at("base_hash").get<std::string>() != base ||
        chash != child.at("config_hash").get<std::string>()) {
      throw ConfigError("config_hash", "child run " + cdir.string() + " does not belong to sweep " + base);
    }
    const auto rows = read_metrics(cdir / kMetrics);
    if (rows.empty()) throw std::runtime_error("no metrics rows in " + (cdir / kMetrics).string());
    plot::Series sa{param + "=" + value, {}, {}}, sc{param + "=" + value, {}, {}};
    for (const auto& r : rows) {
      if (r.at("config_hash").get<std::string>() != chash) {
        throw ConfigError("config_hash", "mismatched metrics hash in " + cdir.string());
      }
      const double e = r.at("epoch").get<double>();
      max_epoch = std::max(max_epoch, r.at("epoch").get<int>());
      sa.x.push_back(e);
      sa.y.push_back(r.at("asr").at("all").get<double>());
      sc.x.push_back(e);
      sc.y.push_back(r.at("acc").at("all").get<double>());
    }
    asr_curves.push_back(std::move(sa));
    acc_curves.push_back(std::move(sc));
    const double x = parse_double(value);
    ga.x_ticks.push_back(x);
    for (int g = 0; g < 4; ++g) {
      groups[static_cast<std::size_t>(g)].x.push_back(x);
      groups[static_cast<std::size_t>(g)].y.push_back(rows.back().at("asr").at(group_keys[g]).get<double>());
    }
  }
  const std::string note = "sweep " + base;
  std::vector<double> ticks;
  for (int e = 1; e <= max_epoch; ++e) ticks.push_back(e);
  std::vector<fs::path> written;
  fs::create_directories(out);
  write_svg(out / "sweep_asr.svg",
            plot::line_chart({"ASR over epochs, sweep over " + param, "epoch", "ASR (All)", ticks, 0.0, 1.0},
                             asr_curves, note),
            written);
  write_svg(out / "sweep_acc.svg",
            plot::line_chart({"Clean accuracy over epochs, sweep over " + param, "epoch", "ACC (All)", ticks, 0.0, 1.0},
                             acc_curves, note),
            written);
  write_svg(out / "sweep_groups.svg", plot::line_chart(ga, groups, note), written);
  return written;
}

}  // namespace

const std::vector<std::string>& sweep_params() {
  static const std::vector<std::string> names = {"q", "T", "alpha", "lambda_div", "rho", "gamma", "target_label", "IR"};
  return names;
}

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep", "expected param=v1,v2,... got '" + text + "'");
  SweepSpec s;
  s.param = text.substr(0, eq);
  const auto& aliases = sweep_aliases();
  if (auto it = aliases.find(s.param); it != aliases.end()) {
    s.key = it->second;
  } else {
    for (const auto& [alias, key] : aliases) {
      if (key == s.param) s.key = key;
    }
  }
  if (s.key.empty()) {
    std::string allowed;
    for (const auto& n : sweep_params()) allowed += (allowed.empty() ? "" : ", ") + n;
    throw ConfigError("sweep", "cannot sweep '" + s.param + "'; allowed: " + allowed);
  }
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t") + 1);
    if (v.empty()) throw ConfigError("sweep", "empty value in '" + text + "'");
    if (std::find(s.values.begin(), s.values.end(), v) != s.values.end()) {
      throw ConfigError("sweep", "duplicate value " + v);
    }
    s.values.push_back(v);
  }
  if (s.values.empty()) throw ConfigError("sweep", "no values given for " + s.param);
  return s;
}

RunResult cmd_train(const ExperimentConfig& config, const fs::path& out, const TrainOptions& opts) {
  return train_impl(config, out, opts, json());
}

SweepResult cmd_ablate(const ExperimentConfig& base, const SweepSpec& sweep, const fs::path& out,
                       const TrainOptions& opts) {
  base.validate();
  std::vector<ExperimentConfig> children;
  for (const auto& v : sweep.values) {
    ExperimentConfig c = base;
    c.set(sweep.key, v);
    c.validate();
    children.push_back(std::move(c));
  }
  if (!opts.resume && non_empty_dir(out)) {
    throw ConfigError("out_dir", out.string() + " exists and is not empty; refusing to overwrite (use --resume)");
  }
  fs::create_directories(out);
  SweepResult result;
  result.dir = out;
  result.base_hash = base.hash();
  result.values = sweep.values;

  json sj = {{"param", sweep.param}, {"key", sweep.key}, {"values", sweep.values},
             {"base_hash", result.base_hash}, {"seed", base.seed}, {"children", json::array()}};
  for (std::size_t i = 0; i < children.size(); ++i) {
    sj["children"].push_back({{"value", sweep.values[i]},
                              {"dir", sweep.param + "=" + sweep.values[i]},
                              {"config_hash", children[i].hash()}});
  }
  write_text(out / kSweep, sj.dump(2) + "\n");

  std::ostringstream csv;
  csv << "param,value,ASR_All,ASR_Many,ASR_Medium,ASR_Few,ACC_All,ACC_Many,ACC_Medium,ACC_Few,config_hash\n";
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (opts.log) opts.log(sweep.param + "=" + sweep.values[i]);
    const json info = {{"param", sweep.param}, {"key", sweep.key}, {"value", sweep.values[i]},
                       {"base_hash", result.base_hash}};
    auto run = train_impl(children[i], out / (sweep.param + "=" + sweep.values[i]), opts, info);
    const auto& r = run.final_report;
    csv << sweep.param << ',' << sweep.values[i] << ',' << format_number(r.asr.groups.all) << ','
        << format_number(r.asr.groups.many) << ',' << format_number(r.asr.groups.medium) << ','
        << format_number(r.asr.groups.few) << ',' << format_number(r.acc.groups.all) << ','
        << format_number(r.acc.groups.many) << ',' << format_number(r.acc.groups.medium) << ','
        << format_number(r.acc.groups.few) << ',' << run.config_hash << '\n';
    result.runs.push_back(std::move(run));
  }
  write_text(out / "ablation.csv", csv.str());
  return result;
}

std::vector<fs::path> cmd_plot(const fs::path& dir, const fs::path& out) {
  const fs::path target = out.empty() ? dir : out;
  if (fs::exists(dir / kSweep)) return plot_sweep(dir, target);
  if (fs::exists(dir / kManifest) && fs::exists(dir / kMetrics)) return plot_run(dir, target);
  throw std::runtime_error("no metrics found in " + dir.string());
}

ExperimentConfig load_run_config(const fs::path& run_dir) {
  if (!fs::exists(run_dir / kConfig)) throw std::runtime_error("no " + std::string(kConfig) + " in " + run_dir.string());
  ExperimentConfig cfg = ExperimentConfig::load(run_dir / kConfig);
  cfg.out_dir = run_dir.string();
  return cfg;
}

fs::path cmd_render_triggers(const fs::path& run_dir, const fs::path& out, int count) {
  if (count < 1) throw ConfigError("count", "must be >= 1");
  const ExperimentConfig cfg = load_run_config(run_dir);
  const auto ds = training::prepare_datasets(cfg);
  auto state = training::load_checkpoint(run_dir / kCheckpoint, cfg, ds);

  // Round-robin over non-target classes so the grid covers head and tail.
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.test.num_classes));
  for (std::size_t i = 0; i < ds.test.size(); ++i) by_class[static_cast<std::size_t>(ds.test.labels[i])].push_back(i);
  std::vector<const Image*> picked;
  for (std::size_t round = 0; static_cast<int>(picked.size()) < count; ++round) {
    bool any = false;
    for (int k = 0; k < ds.test.num_classes && static_cast<int>(picked.size()) < count; ++k) {
      if (k == cfg.attack_target_label || round >= by_class[static_cast<std::size_t>(k)].size()) continue;
      picked.push_back(&ds.test.images[by_class[static_cast<std::size_t>(k)][round]]);
      any = true;
    }
    if (!any) break;
  }
  if (picked.empty()) throw std::runtime_error("no non-target test images");
  const Tensor x = stack_images(picked);
  Tensor trig;
  if (cfg.attack_trigger == "patch") {
    trig = trigger::apply_fixed_patch_trigger(Tensor(x.shape()), trigger::PatchSpec::bottom_right(
                                                                     cfg.attack_patch_size, x.h(), x.w()));
  } else {
    trig = trigger::generate_trigger(*state.generator, x);
  }
  const Tensor bd = training::make_trigger_fn(state)(x);

  constexpr int kScale = 4, kGap = 2;
  const int n = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int cw = W * kScale + kGap, ch = H * kScale + kGap;
  Image grid(C, 3 * ch + kGap, n * cw + kGap);
  for (double& v : grid.values()) v = 1.0;
  const Tensor* rows[] = {&x, &trig, &bd};
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H * kScale; ++y) {
          for (int xx = 0; xx < W * kScale; ++xx) {
            grid.at(c, kGap + r * ch + y, kGap + i * cw + xx) = rows[r]->at(i, c, y / kScale, xx / kScale);
          }
        }
      }
    }
  }
  fs::path target = out;
  if (target.empty()) target = run_dir / "triggers.png";
  if (fs::is_directory(target)) target /= "triggers.png";
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  data::write_png(grid, target,
                  {{"config_hash", cfg.hash()},
                   {"Description", "rows: clean, trigger, backdoored; epoch " + std::to_string(state.epoch)}});
  return target;
}

}  // namespace ltb::experiment
