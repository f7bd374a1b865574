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

#include "ltb/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ltb/augment.hpp"
#include "ltb/errors.hpp"

namespace ltb {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<int>(to_int(key, item)));
  if (out.empty()) throw ConfigError(key, "expected a non-empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, _] : ExperimentConfig{}.to_map()) out.push_back(key);
    return out;
  }();
  return k;
}

std::string ExperimentConfig::env_name(const std::string& key) {
  std::string out = "LTB_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "dataset.source") {
    dataset_source = v;
  } else if (key == "dataset.train_path") {
    dataset_train_path = v;
  } else if (key == "dataset.test_path") {
    dataset_test_path = v;
  } else if (key == "dataset.classes") {
    dataset_classes = static_cast<int>(to_int(key, v));
  } else if (key == "dataset.imbalance_ratio") {
    dataset_imbalance_ratio = to_double(key, v);
  } else if (key == "dataset.n_max") {
    dataset_n_max = static_cast<int>(to_int(key, v));
  } else if (key == "dataset.profile") {
    dataset_profile = v;
  } else if (key == "dataset.channels") {
    dataset_channels = static_cast<int>(to_int(key, v));
  } else if (key == "dataset.size") {
    dataset_size = static_cast<int>(to_int(key, v));
  } else if (key == "dataset.test_per_class") {
    dataset_test_per_class = static_cast<int>(to_int(key, v));
  } else if (key == "dataset.noise") {
    dataset_noise = to_double(key, v);
  } else if (key == "attack.poison_rate") {
    attack_poison_rate = to_double(key, v);
  } else if (key == "attack.alpha") {
    attack_alpha = to_double(key, v);
  } else if (key == "attack.target_label") {
    attack_target_label = static_cast<int>(to_int(key, v));
  } else if (key == "attack.lambda_div") {
    attack_lambda_div = to_double(key, v);
  } else if (key == "attack.epsilon") {
    attack_epsilon = to_double(key, v);
  } else if (key == "attack.trigger") {
    attack_trigger = v;
  } else if (key == "attack.patch_size") {
    attack_patch_size = static_cast<int>(to_int(key, v));
  } else if (key == "augment.operators") {
    augment_operators = split_list(v);
    if (augment_operators == augment::Registry::default_operator_names()) augment_operators.clear();
  } else if (key == "augment.s_max") {
    augment_s_max = static_cast<int>(to_int(key, v));
  } else if (key == "selector.q") {
    selector_q = static_cast<int>(to_int(key, v));
  } else if (key == "selector.temperature") {
    selector_temperature = to_double(key, v);
  } else if (key == "selector.gamma") {
    selector_gamma = to_double(key, v);
  } else if (key == "selector.dt_per_class") {
    selector_dt_per_class = static_cast<int>(to_int(key, v));
  } else if (key == "selector.head_steps") {
    selector_head_steps = static_cast<int>(to_int(key, v));
  } else if (key == "selector.head_lr") {
    selector_head_lr = to_double(key, v);
  } else if (key == "selector.clean_aug_prob") {
    selector_clean_aug_prob = to_double(key, v);
  } else if (key == "train.epochs") {
    train_epochs = static_cast<int>(to_int(key, v));
  } else if (key == "train.batch_size") {
    train_batch_size = static_cast<int>(to_int(key, v));
  } else if (key == "train.lr") {
    train_lr = to_double(key, v);
  } else if (key == "train.momentum") {
    train_momentum = to_double(key, v);
  } else if (key == "train.weight_decay") {
    train_weight_decay = to_double(key, v);
  } else if (key == "train.generator_lr") {
    train_generator_lr = to_double(key, v);
  } else if (key == "train.logit_adjust_tau") {
    train_logit_adjust_tau = to_double(key, v);
  } else if (key == "train.lr_schedule") {
    train_lr_schedule = v;
  } else if (key == "model.widths") {
    model_widths = to_int_list(key, v);
  } else if (key == "generator.widths") {
    generator_widths = to_int_list(key, v);
  } else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw ConfigError(key, "must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "out_dir") {
    out_dir = v;
  } else {
    throw ConfigError(key, "unknown configuration key");
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::apply_env_overrides() {
  for (const auto& key : keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) set(key, v);
  }
  if (const char* v = std::getenv(env_name("out_dir").c_str())) set("out_dir", v);
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["dataset.source"] = dataset_source;
  m["dataset.train_path"] = dataset_train_path;
  m["dataset.test_path"] = dataset_test_path;
  m["dataset.classes"] = std::to_string(dataset_classes);
  m["dataset.imbalance_ratio"] = format_number(dataset_imbalance_ratio);
  m["dataset.n_max"] = std::to_string(dataset_n_max);
  m["dataset.profile"] = dataset_profile;
  m["dataset.channels"] = std::to_string(dataset_channels);
  m["dataset.size"] = std::to_string(dataset_size);
  m["dataset.test_per_class"] = std::to_string(dataset_test_per_class);
  m["dataset.noise"] = format_number(dataset_noise);
  m["attack.poison_rate"] = format_number(attack_poison_rate);
  m["attack.alpha"] = format_number(attack_alpha);
  m["attack.target_label"] = std::to_string(attack_target_label);
  m["attack.lambda_div"] = format_number(attack_lambda_div);
  m["attack.epsilon"] = format_number(attack_epsilon);
  m["attack.trigger"] = attack_trigger;
  m["attack.patch_size"] = std::to_string(attack_patch_size);
  m["augment.operators"] = join(augment_operators.empty() ? augment::Registry::default_operator_names()
                                                          : augment_operators);
  m["augment.s_max"] = std::to_string(augment_s_max);
  m["selector.q"] = std::to_string(selector_q);
  m["selector.temperature"] = format_number(selector_temperature);
  m["selector.gamma"] = format_number(selector_gamma);
  m["selector.dt_per_class"] = std::to_string(selector_dt_per_class);
  m["selector.head_steps"] = std::to_string(selector_head_steps);
  m["selector.head_lr"] = format_number(selector_head_lr);
  m["selector.clean_aug_prob"] = format_number(selector_clean_aug_prob);
  m["train.epochs"] = std::to_string(train_epochs);
  m["train.batch_size"] = std::to_string(train_batch_size);
  m["train.lr"] = format_number(train_lr);
  m["train.momentum"] = format_number(train_momentum);
  m["train.weight_decay"] = format_number(train_weight_decay);
  m["train.generator_lr"] = format_number(train_generator_lr);
  m["train.logit_adjust_tau"] = format_number(train_logit_adjust_tau);
  m["train.lr_schedule"] = train_lr_schedule;
  m["model.widths"] = join(model_widths);
  m["generator.widths"] = join(generator_widths);
  m["seed"] = std::to_string(seed);
  return m;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_map()) os << k << " = " << v << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const {
  if (dataset_source != "synthetic" && dataset_source != "packed" && dataset_source != "folder") {
    throw ConfigError("dataset.source", "must be synthetic, packed or folder");
  }
  if (dataset_source != "synthetic") {
    if (dataset_train_path.empty()) throw ConfigError("dataset.train_path", "required for source " + dataset_source);
    if (dataset_test_path.empty()) throw ConfigError("dataset.test_path", "required for source " + dataset_source);
  }
  if (dataset_classes < 3) throw ConfigError("dataset.classes", "must be >= 3 (group split)");
  if (!(dataset_imbalance_ratio >= 1.0)) throw ConfigError("dataset.imbalance_ratio", "must be >= 1");
  if (dataset_n_max < 1) throw ConfigError("dataset.n_max", "must be >= 1");
  if (dataset_profile != "exponential" && dataset_profile != "step") {
    throw ConfigError("dataset.profile", "must be exponential or step");
  }
  if (dataset_channels != 1 && dataset_channels != 3) throw ConfigError("dataset.channels", "must be 1 or 3");
  if (!(attack_poison_rate >= 0.0 && attack_poison_rate < 1.0)) {
    throw ConfigError("attack.poison_rate", "must lie in [0, 1)");
  }
  if (!(attack_alpha >= 0.0 && attack_alpha <= 1.0)) throw ConfigError("attack.alpha", "must lie in [0, 1]");
  if (attack_target_label < 0 || attack_target_label >= dataset_classes) {
    throw ConfigError("attack.target_label", "must be a class index in [0, dataset.classes)");
  }
  if (!(attack_lambda_div >= 0.0)) throw ConfigError("attack.lambda_div", "must be >= 0");
  if (!(attack_epsilon > 0.0)) throw ConfigError("attack.epsilon", "must be > 0");
  if (attack_trigger != "generator" && attack_trigger != "patch") {
    throw ConfigError("attack.trigger", "must be generator or patch");
  }
  if (attack_patch_size < 1) throw ConfigError("attack.patch_size", "must be >= 1");
  for (const auto& op : augment_operators) {
    if (!augment::Registry::is_known_operator(op)) {
      throw ConfigError("augment.operators", "unknown operator '" + op + "'");
    }
  }
  if (augment_s_max < 1) throw ConfigError("augment.s_max", "must be >= 1");
  const int n_ops = augment_operators.empty()
                        ? static_cast<int>(augment::Registry::default_operator_names().size())
                        : static_cast<int>(augment_operators.size());
  if (selector_q < 0 || selector_q > augment_s_max) throw ConfigError("selector.q", "must lie in [0, s_max]");
  if (selector_q > n_ops) throw ConfigError("selector.q", "must not exceed the number of operators");
  if (!(selector_temperature > 0.0)) throw ConfigError("selector.temperature", "must be > 0");
  if (!(selector_gamma >= 0.0 && selector_gamma <= 1.0)) throw ConfigError("selector.gamma", "must lie in [0, 1]");
  if (selector_dt_per_class < 1) throw ConfigError("selector.dt_per_class", "must be >= 1");
  if (selector_head_steps < 0) throw ConfigError("selector.head_steps", "must be >= 0");
  if (!(selector_head_lr > 0.0)) throw ConfigError("selector.head_lr", "must be > 0");
  if (!(selector_clean_aug_prob >= 0.0 && selector_clean_aug_prob <= 1.0)) {
    throw ConfigError("selector.clean_aug_prob", "must lie in [0, 1]");
  }
  if (train_epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
  if (train_batch_size < 2) throw ConfigError("train.batch_size", "must be >= 2");
  if (!(train_lr > 0.0)) throw ConfigError("train.lr", "must be > 0");
  if (!(train_momentum >= 0.0 && train_momentum < 1.0)) throw ConfigError("train.momentum", "must lie in [0, 1)");
  if (!(train_weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be >= 0");
  if (!(train_generator_lr > 0.0)) throw ConfigError("train.generator_lr", "must be > 0");
  if (!(train_logit_adjust_tau >= 0.0)) throw ConfigError("train.logit_adjust_tau", "must be >= 0");
  if (train_lr_schedule != "constant" && train_lr_schedule != "cosine") {
    throw ConfigError("train.lr_schedule", "must be constant or cosine");
  }
  for (int w : model_widths) {
    if (w < 1) throw ConfigError("model.widths", "widths must be positive");
  }
  for (int w : generator_widths) {
    if (w < 1) throw ConfigError("generator.widths", "widths must be positive");
  }
}

}  // namespace ltb
