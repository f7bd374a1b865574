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

// Python bindings for the ltbackdoor core. Images cross the boundary as
// float64 numpy arrays shaped (C, H, W); batches as (N, C, H, W).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cmath>

#include "ltb/augment.hpp"
#include "ltb/clean_selector.hpp"
#include "ltb/config.hpp"
#include "ltb/errors.hpp"
#include "ltb/experiment.hpp"
#include "ltb/longtail.hpp"
#include "ltb/metrics.hpp"
#include "ltb/nn/loss.hpp"
#include "ltb/training.hpp"
#include "ltb/trigger.hpp"

namespace py = pybind11;
using namespace ltb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3) throw DomainError("expected an array shaped (C, H, W)");
  return Image(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
               std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_image(const Image& im) {
  Array out({im.channels(), im.height(), im.width()});
  std::copy(im.values().begin(), im.values().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 4) throw DomainError("expected an array shaped (N, C, H, W)");
  const Shape s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                static_cast<int>(a.shape(3))};
  return Tensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict groups(const metrics::GroupMeans& g) {
  py::dict d;
  d["all"] = g.all;
  d["many"] = g.many;
  d["medium"] = g.medium;
  d["few"] = g.few;
  return d;
}

py::dict class_report(const metrics::ClassReport& r) {
  py::dict d;
  py::list per;
  for (double v : r.per_class) per.append(std::isnan(v) ? py::object(py::none()) : py::object(py::float_(v)));
  d["per_class"] = per;
  d["groups"] = groups(r.groups);
  return d;
}

py::dict run_result(const experiment::RunResult& r) {
  py::dict d;
  d["dir"] = r.dir;
  d["config_hash"] = r.config_hash;
  d["epochs"] = r.epochs_done;
  d["acc"] = class_report(r.final_report.acc);
  d["asr"] = class_report(r.final_report.asr);
  d["schedule"] = r.schedule;
  return d;
}

ExperimentConfig config_from(const py::object& obj) {
  if (py::isinstance<ExperimentConfig>(obj)) return obj.cast<ExperimentConfig>();
  ExperimentConfig cfg;
  if (py::isinstance<py::dict>(obj)) {
    for (auto [k, v] : obj.cast<py::dict>()) cfg.set(py::str(k), py::str(v));
  } else {
    cfg = ExperimentConfig::parse(obj.cast<std::string>());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Long-tail backdoor training core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("parse", &ExperimentConfig::parse, py::arg("text"))
      .def_static("load", [](const std::filesystem::path& p) { return ExperimentConfig::load(p); }, py::arg("path"))
      .def("set", &ExperimentConfig::set, py::arg("key"), py::arg("value"))
      .def("validate", &ExperimentConfig::validate)
      .def("canonical", &ExperimentConfig::canonical)
      .def("hash", &ExperimentConfig::hash)
      .def("to_dict", &ExperimentConfig::to_map)
      .def("__repr__", [](const ExperimentConfig& c) { return "<Config " + c.hash() + ">"; });

  m.def("longtail_counts", [](int n_max, double ir, int k, const std::string& profile) {
    return data::longtail_counts(n_max, ir, k, data::parse_profile(profile));
  }, py::arg("n_max"), py::arg("imbalance_ratio"), py::arg("num_classes"), py::arg("profile") = "exponential");

  m.def("group_split", [](const std::vector<int>& counts) {
    const auto s = metrics::group_split(counts);
    py::dict d;
    d["many"] = s.many;
    d["medium"] = s.medium;
    d["few"] = s.few;
    return d;
  }, py::arg("counts"));

  m.def("softmax", [](const std::vector<double>& z, double t) { return nn::softmax(z, t); }, py::arg("logits"),
        py::arg("temperature") = 1.0);
  m.def("logit_adjust", [](const std::vector<double>& z, const std::vector<double>& priors, double tau) {
    return training::logit_adjust(z, priors, tau);
  }, py::arg("logits"), py::arg("priors"), py::arg("tau"));

  m.def("update_strengths", [](const std::vector<int>& scores, const std::vector<double>& acc, double gamma,
                               int s_max) {
    return selectors::update_strengths(selectors::StrengthSchedule::restore(s_max, gamma, {scores}), acc, gamma)
        .scores();
  }, py::arg("scores"), py::arg("acc"), py::arg("gamma"), py::arg("s_max") = 10);

  m.def("operator_names", [] { return augment::Registry::default_operator_names(); });
  m.def("augment", [](const Array& image, const std::vector<std::pair<std::string, int>>& ops, int s_max,
                      std::uint64_t seed) {
    const auto names = augment::Registry::default_operator_names();
    const auto reg = augment::Registry::build(names, s_max);
    std::vector<augment::AugOperation> seq;
    for (const auto& [name, strength] : ops) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ConfigError("augment.operators", "unknown operator '" + name + "'");
      seq.push_back({static_cast<int>(it - names.begin()), strength});
    }
    Rng rng(seed);
    return from_image(augment::apply_pipeline(reg, seq, to_image(image), rng));
  }, py::arg("image"), py::arg("ops"), py::arg("s_max") = 10, py::arg("seed") = 0);

  m.def("blend", [](const Array& x, const Array& g, double alpha) {
    return from_image(trigger::blend(to_image(x), to_image(g), alpha));
  }, py::arg("x"), py::arg("trigger"), py::arg("alpha"));

  m.def("diversity_loss", [](const Array& x, const Array& xp, const Array& g, const Array& gp, double eps) {
    return trigger::diversity_loss(to_tensor(x), to_tensor(xp), to_tensor(g), to_tensor(gp), eps);
  }, py::arg("sources"), py::arg("partners"), py::arg("triggers"), py::arg("partner_triggers"),
        py::arg("epsilon") = 1e-6);

  m.def("train", [](const py::object& config, const std::filesystem::path& out, bool resume) {
    const auto cfg = config_from(config);
    experiment::TrainOptions opts;
    opts.resume = resume;
    experiment::RunResult r;
    {
      py::gil_scoped_release release;
      r = experiment::cmd_train(cfg, out, opts);
    }
    return run_result(r);
  }, py::arg("config"), py::arg("out"), py::arg("resume") = false);

  m.def("plot", [](const std::filesystem::path& dir) { return experiment::cmd_plot(dir); }, py::arg("dir"));
  m.def("render_triggers", &experiment::cmd_render_triggers, py::arg("run_dir"), py::arg("out"),
        py::arg("count") = 8);
}
