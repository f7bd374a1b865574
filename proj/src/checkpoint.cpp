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

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ltb/errors.hpp"
#include "ltb/training.hpp"

namespace ltb::training {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'B', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& p) : out_(p, std::ios::binary) {
    if (!out_) throw ConfigError("out_dir", "cannot write checkpoint " + p.string());
  }
  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i64(x);
  }
  void magic() { out_.write(kMagic, 4); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& p) : in_(p, std::ios::binary), path_(p) {
    if (!in_) throw ConfigError("checkpoint", "cannot open " + p.string());
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::string str() {
    std::string s(bounded(u64()), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    check();
    return s;
  }
  void doubles_into(std::vector<double>& v) {
    const auto n = u64();
    if (n != v.size()) throw ConfigError("checkpoint", "tensor size mismatch in " + path_.string());
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
  }
  std::vector<int> ints() {
    std::vector<int> v(bounded(u64()));
    for (int& x : v) x = static_cast<int>(i64());
    return v;
  }
  void magic() {
    char m[4];
    in_.read(m, 4);
    check();
    if (std::memcmp(m, kMagic, 4) != 0) throw ConfigError("checkpoint", "not a checkpoint: " + path_.string());
  }

 private:
  std::size_t bounded(std::uint64_t n) {
    if (n > (1ULL << 32)) throw ConfigError("checkpoint", "corrupt length in " + path_.string());
    return static_cast<std::size_t>(n);
  }
  void check() {
    if (!in_) throw ConfigError("checkpoint", "truncated checkpoint " + path_.string());
  }
  std::ifstream in_;
  std::filesystem::path path_;
};

void write_params(Writer& w, const std::vector<nn::Param*>& ps) {
  w.u64(ps.size());
  for (const auto* p : ps) w.doubles(p->value);
}
void read_params(Reader& r, const std::vector<nn::Param*>& ps) {
  if (r.u64() != ps.size()) throw ConfigError("checkpoint", "parameter count mismatch");
  for (auto* p : ps) r.doubles_into(p->value);
}
void write_slots(Writer& w, const std::vector<std::vector<double>>& slots) {
  w.u64(slots.size());
  for (const auto& s : slots) w.doubles(s);
}
void read_slots(Reader& r, std::vector<std::vector<double>>& slots) {
  if (r.u64() != slots.size()) throw ConfigError("checkpoint", "optimiser state mismatch");
  for (auto& s : slots) r.doubles_into(s);
}
void write_adam(Writer& w, nn::Adam& a) {
  write_slots(w, a.first_moment());
  write_slots(w, a.second_moment());
  w.i64(a.step_count());
}
void read_adam(Reader& r, nn::Adam& a) {
  read_slots(r, a.first_moment());
  read_slots(r, a.second_moment());
  a.step_count() = r.i64();
}

}  // namespace

void save_checkpoint(const RunState& cs, const std::filesystem::path& path) {
  // Accessors are non-const; nothing below mutates the state.
  auto& s = const_cast<RunState&>(cs);
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    Writer w(tmp);
    w.magic();
    w.u64(kVersion);
    w.str(s.config.hash());
    w.i64(s.epoch);
    w.str(s.rng.state());
    write_params(w, s.model->params());
    const auto bufs = s.model->buffers();
    w.u64(bufs.size());
    for (const auto* b : bufs) w.doubles(*b);
    write_params(w, s.generator->params());
    write_params(w, s.head->params());
    write_slots(w, s.model_opt->state());
    write_adam(w, *s.generator_opt);
    write_adam(w, *s.head_opt);
    const auto& hist = s.schedule.history();
    w.u64(hist.size());
    for (const auto& h : hist) w.ints(h);
    w.finish();
  }
  std::filesystem::rename(tmp, path);
}

RunState load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                         const Datasets& datasets) {
  RunState s = init_state(config, datasets);
  Reader r(path);
  r.magic();
  if (r.u64() != kVersion) throw ConfigError("checkpoint", "unsupported checkpoint version");
  const std::string hash = r.str();
  if (hash != config.hash()) {
    throw ConfigError("checkpoint", "config hash mismatch: checkpoint " + hash + ", config " + config.hash());
  }
  s.epoch = static_cast<int>(r.i64());
  s.rng.set_state(r.str());
  read_params(r, s.model->params());
  auto bufs = s.model->buffers();
  if (r.u64() != bufs.size()) throw ConfigError("checkpoint", "buffer count mismatch");
  for (auto* b : bufs) r.doubles_into(*b);
  read_params(r, s.generator->params());
  read_params(r, s.head->params());
  read_slots(r, s.model_opt->state());
  read_adam(r, *s.generator_opt);
  read_adam(r, *s.head_opt);
  std::vector<std::vector<int>> hist(static_cast<std::size_t>(r.u64()));
  for (auto& h : hist) h = r.ints();
  s.schedule = selectors::StrengthSchedule::restore(config.augment_s_max, config.selector_gamma, std::move(hist));
  return s;
}

}  // namespace ltb::training
