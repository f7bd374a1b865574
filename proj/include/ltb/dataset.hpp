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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ltb/tensor.hpp"

namespace ltb::data {

/// Labeled image collection. Labels are 0-based class indices.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string source;

  std::size_t size() const { return images.size(); }
  std::vector<int> class_counts() const;
  /// Indices of samples with the given label, in storage order.
  std::vector<std::size_t> indices_of(int label) const;
};

/// Packed binary layout (little-endian):
///   "LTBP" | u32 version=1 | u32 count | u32 channels | u32 height | u32 width
///   | u32 num_classes | count x (u32 label, channels*height*width u8 pixels, CHW order)
void save_packed(const Dataset& ds, const std::filesystem::path& path);
Dataset load_packed(const std::filesystem::path& path);

/// Per-class subfolders (sorted by name, one class each) of .png/.ppm/.pgm files.
Dataset load_folder(const std::filesystem::path& root, int channels);

Image read_image(const std::filesystem::path& path, int channels);
/// 8-bit PNG; `text` entries become tEXt chunks.
void write_png(const Image& image, const std::filesystem::path& path,
               const std::map<std::string, std::string>& text = {});

struct SyntheticSpec {
  int num_classes = 10;
  int per_class = 500;
  int channels = 3;
  int size = 16;
  double noise = 0.06;
  std::uint64_t seed = 0;
};

/// Procedural shape/texture corpus: one geometric motif per class (disk, square,
/// triangle, plus, ring, horizontal/vertical/diagonal bars, checkerboard, X),
/// drawn with random colours, placement, scale and pixel noise. Balanced, at
/// most 10 classes.
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace ltb::data
