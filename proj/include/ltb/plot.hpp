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

#include <string>
#include <vector>

namespace ltb::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN points are skipped
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x_ticks;  // one <line class="xtick"> each
  double y_min = 0.0;
  double y_max = 1.0;
};

/// SVG line chart; each series is one <polyline class="series">. The note
/// (e.g. a config hash) goes into <desc> and the footer.
std::string line_chart(const Axes& axes, const std::vector<Series>& series, const std::string& note);

/// SVG bar chart; one <rect class="bar"> per non-NaN value.
/// `groups` (same length as values) picks the bar colour.
std::string bar_chart(const Axes& axes, const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<int>& groups, const std::string& note);

std::string escape_xml(const std::string& s);

}  // namespace ltb::plot
