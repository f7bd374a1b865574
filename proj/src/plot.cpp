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

#include "ltb/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ltb/config.hpp"

namespace ltb::plot {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& o, const Axes& a, const std::string& note) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<desc>" << escape_xml(note) << "</desc>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(a.title)
    << "</text>\n";
  o << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\">" << escape_xml(a.x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 14 " << kHeight / 2
    << ")\" text-anchor=\"middle\">" << escape_xml(a.y_label) << "</text>\n";
}

void y_axis(std::ostringstream& o, const Frame& f) {
  o << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
    << f.py(f.y0) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kLeft << "\" y2=\"" << f.py(f.y1)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">"
      << format_number(std::round(v * 100) / 100) << "</text>\n";
  }
}

void footer(std::ostringstream& o, const std::string& note) {
  o << "<text x=\"" << kWidth - 6 << "\" y=\"" << kHeight - 4 << "\" text-anchor=\"end\" font-size=\"8\" fill=\"#777\">"
    << escape_xml(note) << "</text>\n</svg>\n";
}

}  // namespace

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const Axes& axes, const std::vector<Series>& series, const std::string& note) {
  Frame f{0, 1, axes.y_min, axes.y_max > axes.y_min ? axes.y_max : axes.y_min + 1};
  bool first = true;
  auto widen = [&](double x) {
    if (first) {
      f.x0 = f.x1 = x;
      first = false;
    }
    f.x0 = std::min(f.x0, x);
    f.x1 = std::max(f.x1, x);
  };
  for (double t : axes.x_ticks) widen(t);
  for (const auto& s : series) {
    for (double x : s.x) widen(x);
  }
  std::ostringstream o;
  header(o, axes, note);
  y_axis(o, f);
  for (double t : axes.x_ticks) {
    o << "<line class=\"xtick\" x1=\"" << num(f.px(t)) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << num(f.px(t))
      << "\" y2=\"" << f.py(f.y0) + 4 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(f.px(t)) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">"
      << format_number(t) << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
      if (std::isnan(s.y[j])) continue;
      o << num(f.px(s.x[j])) << ',' << num(f.py(s.y[j])) << ' ';
    }
    o << "\"><title>" << escape_xml(s.label) << "</title></polyline>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i);
    o << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 28
      << "\" y2=\"" << ly << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kWidth - kRight + 32 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
  }
  footer(o, note);
  return o.str();
}

std::string bar_chart(const Axes& axes, const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<int>& groups, const std::string& note) {
  const double n = static_cast<double>(values.size());
  Frame f{0, n, axes.y_min, axes.y_max > axes.y_min ? axes.y_max : axes.y_min + 1};
  const double slot = (kWidth - kLeft - kRight) / std::max(1.0, n);
  std::ostringstream o;
  header(o, axes, note);
  y_axis(o, f);
  static const char* group_names[] = {"Many", "Medium", "Few"};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    const int g = i < groups.size() ? groups[i] : 0;
    if (!std::isnan(values[i])) {
      const double v = std::clamp(values[i], f.y0, f.y1);
      o << "<rect class=\"bar\" x=\"" << num(x + slot * 0.15) << "\" y=\"" << num(f.py(v)) << "\" width=\""
        << num(slot * 0.7) << "\" height=\"" << num(f.py(f.y0) - f.py(v)) << "\" fill=\""
        << kPalette[g % std::size(kPalette)] << "\"><title>" << escape_xml(labels.at(i)) << ": "
        << format_number(values[i]) << "</title></rect>\n";
    }
    o << "<text x=\"" << num(x + slot / 2) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">"
      << escape_xml(labels.at(i)) << "</text>\n";
  }
  for (int g = 0; g < 3; ++g) {
    const double ly = kTop + 14.0 * g;
    o << "<rect x=\"" << kWidth - kRight + 10 << "\" y=\"" << ly - 6 << "\" width=\"12\" height=\"10\" fill=\""
      << kPalette[g] << "\"/>\n";
    o << "<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << ly + 3 << "\">" << group_names[g] << "</text>\n";
  }
  footer(o, note);
  return o.str();
}

}  // namespace ltb::plot
