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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ltb {

/// NCHW extents. Vectors and matrices use h = w = 1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  /// Elements per sample.
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense NCHW tensor of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<double> sample(int i) {
    return {data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(),
            shape_.sample_size()};
  }
  std::span<const double> sample(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(),
            shape_.sample_size()};
  }

  /// Copy of samples [begin, end).
  Tensor slice(int begin, int end) const;
  /// Same data, new extents with equal element count.
  Tensor reshaped(Shape s) const;

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Stacks tensors along the batch axis. All inputs share c/h/w.
Tensor concat(const std::vector<const Tensor*>& parts);
Tensor concat(const Tensor& a, const Tensor& b);

/// A single image (c, h, w) with values conventionally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : c_(c), h_(h), w_(w), data_(static_cast<std::size_t>(c) * h * w, fill) {}
  Image(int c, int h, int w, std::vector<double> data);

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Image& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  double& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x]; }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }
  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void clamp01();
  bool operator==(const Image&) const = default;

 private:
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

Tensor stack_images(std::span<const Image> images);
Tensor stack_images(const std::vector<const Image*>& images);
Image image_from_tensor(const Tensor& t, int index);

}  // namespace ltb
