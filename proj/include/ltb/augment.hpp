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

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltb/rng.hpp"
#include "ltb/tensor.hpp"

namespace ltb::augment {

enum class OperatorKind { kGeometric, kPhotometric };

/// Image operator whose parameter is a function of a discrete strength level.
///
/// The applied magnitude at level s is linear between `magnitude_min` (s = 0,
/// the identity setting) and `magnitude_max` (s = s_max). Operators without a
/// scalar parameter (flip, equalize, autocontrast) ignore the magnitude.
struct AugOperatorSpec {
  using ApplyFn = std::function<void(Image&, double magnitude, Rng&)>;

  std::string name;
  OperatorKind kind = OperatorKind::kPhotometric;
  double magnitude_min = 0.0;
  double magnitude_max = 0.0;
  bool parameterless = false;
  ApplyFn apply;

  double magnitude(int strength, int s_max) const;
};

/// One element of the operation set: an operator at a strength level.
/// Strength 0 is the identity.
struct AugOperation {
  int operator_id = 0;
  int strength = 0;

  bool is_identity() const { return strength == 0; }
  bool operator==(const AugOperation&) const = default;
};

/// All N operations at one strength level.
struct OperationSlice {
  int strength = 0;
  std::vector<AugOperation> operations;
};

/// Immutable operator table shared by selectors and pipelines.
class Registry {
 public:
  /// Builds a registry from built-in operator names. Throws ConfigError on an
  /// unknown name, an empty list or s_max < 1.
  static Registry build(const std::vector<std::string>& names, int s_max);
  /// Registry over caller-supplied operators (custom or synthetic operators).
  static Registry from_specs(std::vector<AugOperatorSpec> specs, int s_max);

  static const std::vector<std::string>& default_operator_names();
  static bool is_known_operator(const std::string& name);

  int size() const { return static_cast<int>(specs_.size()); }
  int s_max() const { return s_max_; }
  /// Number of non-identity operations, N * s_max.
  std::size_t operation_count() const { return specs_.size() * static_cast<std::size_t>(s_max_); }

  const AugOperatorSpec& spec(int operator_id) const;
  std::vector<std::string> names() const;
  double magnitude(const AugOperation& op) const;

  /// Throws DomainError unless 0 <= s <= s_max.
  OperationSlice operations_at_strength(int s) const;

  /// Fixes the image geometry pipelines accept; other shapes are rejected.
  Registry with_image_shape(int channels, int height, int width) const;
  bool accepts(const Image& image) const;

  /// Applies one operation in place (no clamping).
  void apply(const AugOperation& op, Image& image, Rng& rng) const;

 private:
  Registry(std::vector<AugOperatorSpec> specs, int s_max);

  std::vector<AugOperatorSpec> specs_;
  int s_max_ = 1;
  std::optional<std::array<int, 3>> shape_;
};

using RegistryPtr = std::shared_ptr<const Registry>;

/// Applies `ops` left to right and clamps the result to [0, 1].
/// Throws DomainError on a shape the registry does not accept or an invalid op.
Image apply_pipeline(const Registry& registry, std::span<const AugOperation> ops, const Image& image,
                     Rng& rng);

/// Built-in operators, exposed for direct use and testing.
namespace ops {
void horizontal_flip(Image& im);
void rotate(Image& im, double degrees);
void translate(Image& im, double dx, double dy);
void shear(Image& im, double sx, double sy);
void brightness(Image& im, double factor);
void contrast(Image& im, double factor);
void saturation(Image& im, double factor);
void sharpness(Image& im, double factor);
void posterize(Image& im, int bits_removed);
void solarize(Image& im, double threshold);
void equalize(Image& im);
void autocontrast(Image& im);
}  // namespace ops

}  // namespace ltb::augment
