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

#include "ltb/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "ltb/errors.hpp"

namespace ltb {

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw DomainError("Tensor: data size does not match shape " + shape_.str());
  }
}

Tensor Tensor::slice(int begin, int end) const {
  if (begin < 0 || end > shape_.n || begin > end) throw DomainError("Tensor::slice: bad range");
  Shape s = shape_;
  s.n = end - begin;
  const std::size_t stride = shape_.sample_size();
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return Tensor(s, std::move(out));
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != data_.size()) throw DomainError("Tensor::reshaped: element count differs");
  return Tensor(s, data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!(other.shape_ == shape_)) throw DomainError("Tensor::+=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor concat(const std::vector<const Tensor*>& parts) {
  Shape s{};
  bool first = true;
  for (const Tensor* t : parts) {
    if (t->n() == 0) continue;
    if (first) {
      s = t->shape();
      s.n = 0;
      first = false;
    } else if (t->c() != s.c || t->h() != s.h || t->w() != s.w) {
      throw DomainError("concat: sample shapes differ");
    }
    s.n += t->n();
  }
  std::vector<double> out;
  out.reserve(s.numel());
  for (const Tensor* t : parts) out.insert(out.end(), t->values().begin(), t->values().end());
  return Tensor(s, std::move(out));
}

Tensor concat(const Tensor& a, const Tensor& b) { return concat({&a, &b}); }

Image::Image(int c, int h, int w, std::vector<double> data)
    : c_(c), h_(h), w_(w), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(c) * h * w) {
    throw DomainError("Image: data size does not match shape");
  }
}

void Image::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

Tensor stack_images(const std::vector<const Image*>& images) {
  if (images.empty()) return Tensor();
  const Image& f = *images.front();
  Tensor t(Shape{static_cast<int>(images.size()), f.channels(), f.height(), f.width()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(f)) throw DomainError("stack_images: shape mismatch");
    std::memcpy(t.sample(static_cast<int>(i)).data(), images[i]->values().data(),
                f.size() * sizeof(double));
  }
  return t;
}

Tensor stack_images(std::span<const Image> images) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(images.size());
  for (const Image& im : images) ptrs.push_back(&im);
  return stack_images(ptrs);
}

Image image_from_tensor(const Tensor& t, int index) {
  auto s = t.sample(index);
  return Image(t.c(), t.h(), t.w(), std::vector<double>(s.begin(), s.end()));
}

}  // namespace ltb
