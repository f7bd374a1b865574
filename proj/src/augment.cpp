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

#include "ltb/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ltb/errors.hpp"

namespace ltb::augment {

namespace ops {

namespace {

double gray(const Image& im, int y, int x) {
  if (im.channels() == 3) {
    return 0.299 * im.at(0, y, x) + 0.587 * im.at(1, y, x) + 0.114 * im.at(2, y, x);
  }
  double s = 0.0;
  for (int c = 0; c < im.channels(); ++c) s += im.at(c, y, x);
  return s / im.channels();
}

/// Resamples `im` through an inverse coordinate map with bilinear
/// interpolation; samples outside the image read as 0.
template <typename InverseMap>
void warp(Image& im, InverseMap inv) {
  const Image src = im;
  const int H = im.height(), W = im.width();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto [sx, sy] = inv(static_cast<double>(x), static_cast<double>(y));
      const double fx = std::floor(sx), fy = std::floor(sy);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double ax = sx - fx, ay = sy - fy;
      for (int c = 0; c < im.channels(); ++c) {
        double v = 0.0;
        const auto tap = [&](int yy, int xx, double wgt) {
          if (wgt != 0.0 && yy >= 0 && yy < H && xx >= 0 && xx < W) v += wgt * src.at(c, yy, xx);
        };
        tap(y0, x0, (1 - ax) * (1 - ay));
        tap(y0, x0 + 1, ax * (1 - ay));
        tap(y0 + 1, x0, (1 - ax) * ay);
        tap(y0 + 1, x0 + 1, ax * ay);
        im.at(c, y, x) = v;
      }
    }
  }
}

/// Blend toward a degenerate image: out = degenerate + factor * (im - degenerate).
void enhance(Image& im, const Image& degenerate, double factor) {
  auto p = im.pixels();
  auto d = degenerate.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = d[i] + factor * (p[i] - d[i]);
}

int to_byte(double v) { return std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255); }

}  // namespace

void horizontal_flip(Image& im) {
  for (int c = 0; c < im.channels(); ++c) {
    for (int y = 0; y < im.height(); ++y) {
      for (int x = 0; x < im.width() / 2; ++x) {
        std::swap(im.at(c, y, x), im.at(c, y, im.width() - 1 - x));
      }
    }
  }
}

void rotate(Image& im, double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  const double cx = (im.width() - 1) / 2.0, cy = (im.height() - 1) / 2.0;
  warp(im, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{cs * dx + sn * dy + cx, -sn * dx + cs * dy + cy};
  });
}

void translate(Image& im, double dx, double dy) {
  warp(im, [&](double x, double y) { return std::pair{x - dx, y - dy}; });
}

void shear(Image& im, double sx, double sy) {
  const double cx = (im.width() - 1) / 2.0, cy = (im.height() - 1) / 2.0;
  warp(im, [&](double x, double y) { return std::pair{x - sx * (y - cy), y - sy * (x - cx)}; });
}

void brightness(Image& im, double factor) {
  for (double& v : im.pixels()) v *= factor;
}

void contrast(Image& im, double factor) {
  double mean = 0.0;
  for (int y = 0; y < im.height(); ++y) {
    for (int x = 0; x < im.width(); ++x) mean += gray(im, y, x);
  }
  mean /= static_cast<double>(im.height()) * im.width();
  enhance(im, Image(im.channels(), im.height(), im.width(), mean), factor);
}

void saturation(Image& im, double factor) {
  Image deg(im.channels(), im.height(), im.width());
  for (int y = 0; y < im.height(); ++y) {
    for (int x = 0; x < im.width(); ++x) {
      const double g = gray(im, y, x);
      for (int c = 0; c < im.channels(); ++c) deg.at(c, y, x) = g;
    }
  }
  enhance(im, deg, factor);
}

void sharpness(Image& im, double factor) {
  // Smoothing kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; border pixels keep their value.
  Image deg = im;
  for (int c = 0; c < im.channels(); ++c) {
    for (int y = 1; y + 1 < im.height(); ++y) {
      for (int x = 1; x + 1 < im.width(); ++x) {
        double s = 4.0 * im.at(c, y, x);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) s += im.at(c, y + dy, x + dx);
        }
        deg.at(c, y, x) = s / 13.0;
      }
    }
  }
  enhance(im, deg, factor);
}

void posterize(Image& im, int bits_removed) {
  if (bits_removed <= 0) return;
  const int mask = ~((1 << std::min(bits_removed, 8)) - 1) & 0xff;
  for (double& v : im.pixels()) v = (to_byte(v) & mask) / 255.0;
}

void solarize(Image& im, double threshold) {
  for (double& v : im.pixels()) {
    if (v > threshold) v = 1.0 - v;
  }
}

void equalize(Image& im) {
  const std::size_t plane = static_cast<std::size_t>(im.height()) * im.width();
  for (int c = 0; c < im.channels(); ++c) {
    std::span<double> px = im.pixels().subspan(static_cast<std::size_t>(c) * plane, plane);
    std::array<long, 256> hist{};
    for (double v : px) ++hist[static_cast<std::size_t>(to_byte(v))];
    long last = 0;
    for (int i = 255; i >= 0; --i) {
      if (hist[static_cast<std::size_t>(i)] != 0) {
        last = hist[static_cast<std::size_t>(i)];
        break;
      }
    }
    const long step = (static_cast<long>(plane) - last) / 255;
    if (step == 0) continue;
    std::array<int, 256> lut{};
    long n = step / 2;
    for (std::size_t i = 0; i < 256; ++i) {
      lut[i] = static_cast<int>(std::min(n / step, 255L));
      n += hist[i];
    }
    for (double& v : px) v = lut[static_cast<std::size_t>(to_byte(v))] / 255.0;
  }
}

void autocontrast(Image& im) {
  const std::size_t plane = static_cast<std::size_t>(im.height()) * im.width();
  for (int c = 0; c < im.channels(); ++c) {
    std::span<double> px = im.pixels().subspan(static_cast<std::size_t>(c) * plane, plane);
    const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
    const double a = *lo, b = *hi;
    if (b - a < 1e-12) continue;
    for (double& v : px) v = (v - a) / (b - a);
  }
}

}  // namespace ops

namespace {

double random_sign(Rng& rng) { return rng.coin() ? 1.0 : -1.0; }

std::vector<AugOperatorSpec> builtin_table() {
  using K = OperatorKind;
  std::vector<AugOperatorSpec> t;
  t.push_back({"horizontal-flip", K::kGeometric, 0.0, 0.0, true,
               [](Image& im, double, Rng&) { ops::horizontal_flip(im); }});
  t.push_back({"rotate", K::kGeometric, 0.0, 30.0, false,
               [](Image& im, double m, Rng& r) { ops::rotate(im, random_sign(r) * m); }});
  t.push_back({"translate-x", K::kGeometric, 0.0, 0.3, false, [](Image& im, double m, Rng& r) {
                 ops::translate(im, random_sign(r) * m * im.width(), 0.0);
               }});
  t.push_back({"translate-y", K::kGeometric, 0.0, 0.3, false, [](Image& im, double m, Rng& r) {
                 ops::translate(im, 0.0, random_sign(r) * m * im.height());
               }});
  t.push_back({"shear-x", K::kGeometric, 0.0, 0.3, false,
               [](Image& im, double m, Rng& r) { ops::shear(im, random_sign(r) * m, 0.0); }});
  t.push_back({"shear-y", K::kGeometric, 0.0, 0.3, false,
               [](Image& im, double m, Rng& r) { ops::shear(im, 0.0, random_sign(r) * m); }});
  t.push_back({"brightness", K::kPhotometric, 0.0, 0.9, false,
               [](Image& im, double m, Rng& r) { ops::brightness(im, 1.0 + random_sign(r) * m); }});
  t.push_back({"contrast", K::kPhotometric, 0.0, 0.9, false,
               [](Image& im, double m, Rng& r) { ops::contrast(im, 1.0 + random_sign(r) * m); }});
  t.push_back({"saturation", K::kPhotometric, 0.0, 0.9, false,
               [](Image& im, double m, Rng& r) { ops::saturation(im, 1.0 + random_sign(r) * m); }});
  t.push_back({"sharpness", K::kPhotometric, 0.0, 0.9, false,
               [](Image& im, double m, Rng& r) { ops::sharpness(im, 1.0 + random_sign(r) * m); }});
  // Magnitude is the number of low bits dropped.
  t.push_back({"posterize", K::kPhotometric, 0.0, 4.0, false, [](Image& im, double m, Rng&) {
                 ops::posterize(im, static_cast<int>(std::lround(m)));
               }});
  // Magnitude is 1 - threshold.
  t.push_back({"solarize", K::kPhotometric, 0.0, 1.0, false,
               [](Image& im, double m, Rng&) { ops::solarize(im, 1.0 - m); }});
  t.push_back({"equalize", K::kPhotometric, 0.0, 0.0, true,
               [](Image& im, double, Rng&) { ops::equalize(im); }});
  t.push_back({"autocontrast", K::kPhotometric, 0.0, 0.0, true,
               [](Image& im, double, Rng&) { ops::autocontrast(im); }});
  return t;
}

const std::vector<AugOperatorSpec>& builtins() {
  static const std::vector<AugOperatorSpec> table = builtin_table();
  return table;
}

}  // namespace

double AugOperatorSpec::magnitude(int strength, int s_max) const {
  if (parameterless || s_max <= 0) return magnitude_max;
  return magnitude_min + (magnitude_max - magnitude_min) * static_cast<double>(strength) / s_max;
}

Registry::Registry(std::vector<AugOperatorSpec> specs, int s_max)
    : specs_(std::move(specs)), s_max_(s_max) {
  if (specs_.empty()) throw ConfigError("augment.operators", "at least one operator required");
  if (s_max_ < 1) throw ConfigError("augment.s_max", "must be >= 1");
  for (const auto& s : specs_) {
    if (!s.apply) throw ConfigError("augment.operators", "operator '" + s.name + "' has no kernel");
  }
}

Registry Registry::build(const std::vector<std::string>& names, int s_max) {
  if (names.empty()) throw ConfigError("augment.operators", "at least one operator required");
  std::vector<AugOperatorSpec> specs;
  for (const auto& name : names) {
    const auto& table = builtins();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& s) { return s.name == name; });
    if (it == table.end()) throw ConfigError("augment.operators", "unknown operator '" + name + "'");
    specs.push_back(*it);
  }
  return Registry(std::move(specs), s_max);
}

Registry Registry::from_specs(std::vector<AugOperatorSpec> specs, int s_max) {
  return Registry(std::move(specs), s_max);
}

const std::vector<std::string>& Registry::default_operator_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : builtins()) out.push_back(s.name);
    return out;
  }();
  return names;
}

bool Registry::is_known_operator(const std::string& name) {
  const auto& n = default_operator_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

const AugOperatorSpec& Registry::spec(int operator_id) const {
  if (operator_id < 0 || operator_id >= size()) {
    throw DomainError("augment: operator id " + std::to_string(operator_id) + " out of range");
  }
  return specs_[static_cast<std::size_t>(operator_id)];
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& s : specs_) out.push_back(s.name);
  return out;
}

double Registry::magnitude(const AugOperation& op) const {
  return spec(op.operator_id).magnitude(op.strength, s_max_);
}

OperationSlice Registry::operations_at_strength(int s) const {
  if (s < 0 || s > s_max_) {
    throw DomainError("augment: strength " + std::to_string(s) + " outside [0, " +
                      std::to_string(s_max_) + "]");
  }
  OperationSlice slice{s, {}};
  for (int i = 0; i < size(); ++i) slice.operations.push_back({i, s});
  return slice;
}

Registry Registry::with_image_shape(int channels, int height, int width) const {
  Registry r = *this;
  r.shape_ = std::array<int, 3>{channels, height, width};
  return r;
}

bool Registry::accepts(const Image& image) const {
  if (!shape_) return image.size() > 0;
  return image.channels() == (*shape_)[0] && image.height() == (*shape_)[1] &&
         image.width() == (*shape_)[2];
}

void Registry::apply(const AugOperation& op, Image& image, Rng& rng) const {
  const auto& s = spec(op.operator_id);
  if (op.strength < 0 || op.strength > s_max_) throw DomainError("augment: strength out of range");
  if (op.is_identity()) return;
  s.apply(image, s.magnitude(op.strength, s_max_), rng);
}

Image apply_pipeline(const Registry& registry, std::span<const AugOperation> ops, const Image& image,
                     Rng& rng) {
  if (!registry.accepts(image)) throw DomainError("apply_pipeline: image shape not accepted");
  Image out = image;
  for (const auto& op : ops) {
    registry.apply(op, out, rng);
    out.clamp01();
  }
  out.clamp01();
  return out;
}

}  // namespace ltb::augment
