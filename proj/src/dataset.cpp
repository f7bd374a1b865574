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

#include "ltb/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "ltb/errors.hpp"
#include "ltb/rng.hpp"

namespace ltb::data {

namespace fs = std::filesystem;

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::vector<std::size_t> Dataset::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- packed

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                       static_cast<unsigned char>((v >> 8) & 0xff),
                                       static_cast<unsigned char>((v >> 16) & 0xff),
                                       static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) throw ConfigError("dataset: truncated packed file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

unsigned char to_u8(double v) {
  return static_cast<unsigned char>(std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255));
}

}  // namespace

void save_packed(const Dataset& ds, const fs::path& path) {
  if (ds.images.empty()) throw DomainError("save_packed: empty dataset");
  const Image& f = ds.images.front();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_packed: cannot open " + path.string());
  os.write("LTBP", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(ds.size()));
  put_u32(os, static_cast<std::uint32_t>(f.channels()));
  put_u32(os, static_cast<std::uint32_t>(f.height()));
  put_u32(os, static_cast<std::uint32_t>(f.width()));
  put_u32(os, static_cast<std::uint32_t>(ds.num_classes));
  std::vector<unsigned char> buf(f.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.images[i].same_shape(f)) throw DomainError("save_packed: mixed image shapes");
    put_u32(os, static_cast<std::uint32_t>(ds.labels[i]));
    const auto px = ds.images[i].pixels();
    std::transform(px.begin(), px.end(), buf.begin(), to_u8);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
}

Dataset load_packed(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("dataset.train_path", "cannot open " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || std::string(magic.data(), 4) != "LTBP") {
    throw ConfigError("dataset: " + path.string() + " is not a packed dataset");
  }
  if (get_u32(is) != 1) throw ConfigError("dataset: unsupported packed version");
  const std::uint32_t count = get_u32(is);
  const int c = static_cast<int>(get_u32(is));
  const int h = static_cast<int>(get_u32(is));
  const int w = static_cast<int>(get_u32(is));
  Dataset ds;
  ds.num_classes = static_cast<int>(get_u32(is));
  ds.source = "packed:" + path.string();
  const std::size_t n = static_cast<std::size_t>(c) * h * w;
  std::vector<unsigned char> buf(n);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(get_u32(is));
    if (label < 0 || label >= ds.num_classes) throw ConfigError("dataset: label out of range");
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!is) throw ConfigError("dataset: truncated packed file");
    std::vector<double> px(n);
    std::transform(buf.begin(), buf.end(), px.begin(), [](unsigned char b) { return b / 255.0; });
    ds.images.emplace_back(c, h, w, std::move(px));
    ds.labels.push_back(label);
  }
  return ds;
}

// ---------------------------------------------------------------- image files

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image convert_channels(int src_c, int h, int w, const std::vector<unsigned char>& interleaved,
                       int channels) {
  Image im(channels, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const unsigned char* p = interleaved.data() + (static_cast<std::size_t>(y) * w + x) * src_c;
      for (int c = 0; c < channels; ++c) {
        double v;
        if (src_c == channels) {
          v = p[c];
        } else if (src_c == 1) {
          v = p[0];
        } else {
          v = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
        im.at(c, y, x) = v / 255.0;
      }
    }
  }
  return im;
}

Image read_png(const fs::path& path, int channels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ConfigError("dataset: cannot read " + path.string() + ": " + img.message);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ConfigError("dataset: cannot decode " + path.string() + ": " + img.message);
  }
  return convert_channels(channels, static_cast<int>(img.height), static_cast<int>(img.width), buf,
                          channels);
}

Image read_pnm(const fs::path& path, int channels) {
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  is.get();
  if (!is || (magic != "P6" && magic != "P5") || maxv != 255 || w <= 0 || h <= 0) {
    throw ConfigError("dataset: unsupported PNM file " + path.string());
  }
  const int src_c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * src_c);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw ConfigError("dataset: truncated PNM file " + path.string());
  return convert_channels(src_c, h, w, buf, channels);
}

}  // namespace

Image read_image(const fs::path& path, int channels) {
  if (channels != 1 && channels != 3) throw ConfigError("dataset.channels", "must be 1 or 3");
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path, channels);
  if (ext == ".ppm" || ext == ".pgm") return read_pnm(path, channels);
  throw ConfigError("dataset: unsupported image type " + path.string());
}

namespace {

// Keeps setjmp away from locals with destructors. Returns false on a libpng error.
bool emit_png(FILE* fp, int W, int H, int C, png_bytep* rows, png_text* text, int n_text) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
               C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (n_text > 0) png_set_text(png, info, text, n_text);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

void write_png(const Image& image, const fs::path& path, const std::map<std::string, std::string>& text) {
  if (image.channels() != 1 && image.channels() != 3) throw DomainError("write_png: 1 or 3 channels");
  const int W = image.width(), H = image.height(), C = image.channels();
  std::vector<unsigned char> buf(static_cast<std::size_t>(W) * H * C);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        buf[(static_cast<std::size_t>(y) * W + x) * C + c] = to_u8(image.at(c, y, x));
      }
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(H));
  for (int y = 0; y < H; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * W * C;
  std::vector<std::string> keys, values;
  for (const auto& [k, v] : text) {
    keys.push_back(k);
    values.push_back(v);
  }
  std::vector<png_text> chunks(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = keys[i].data();
    chunks[i].text = values[i].data();
    chunks[i].text_length = values[i].size();
  }
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("write_png: cannot open " + path.string());
  if (!emit_png(fp.get(), W, H, C, rows.data(), chunks.data(), static_cast<int>(chunks.size()))) {
    throw std::runtime_error("write_png: libpng error writing " + path.string());
  }
}

Dataset load_folder(const fs::path& root, int channels) {
  if (!fs::is_directory(root)) throw ConfigError("dataset.train_path", root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("dataset.train_path", "no class subfolders in " + root.string());
  Dataset ds;
  ds.num_classes = static_cast<int>(class_dirs.size());
  ds.source = "folder:" + root.string();
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[k])) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ds.images.push_back(read_image(f, channels));
      ds.labels.push_back(static_cast<int>(k));
      if (!ds.images.back().same_shape(ds.images.front())) {
        throw ConfigError("dataset: image " + f.string() + " differs in size from the first image");
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------- synthetic corpus

namespace {

/// Coverage of a motif at normalized coordinates (u, v) in [-1, 1], already
/// expressed relative to the motif centre and scale.
double motif(int cls, double u, double v, double freq, double phase) {
  const double r = std::hypot(u, v);
  switch (cls) {
    case 0:  // disk
      return r < 0.75 ? 1.0 : 0.0;
    case 1:  // square
      return std::max(std::abs(u), std::abs(v)) < 0.62 ? 1.0 : 0.0;
    case 2:  // upward triangle
      return (v < 0.6 && v > -0.8 && std::abs(u) < (v + 0.8) * 0.55) ? 1.0 : 0.0;
    case 3:  // plus
      return ((std::abs(u) < 0.22 && std::abs(v) < 0.85) || (std::abs(v) < 0.22 && std::abs(u) < 0.85))
                 ? 1.0
                 : 0.0;
    case 4:  // ring
      return (r > 0.45 && r < 0.8) ? 1.0 : 0.0;
    case 5:  // horizontal bars
      return std::sin(freq * v + phase) > 0.0 ? 1.0 : 0.0;
    case 6:  // vertical bars
      return std::sin(freq * u + phase) > 0.0 ? 1.0 : 0.0;
    case 7:  // diagonal bars
      return std::sin(freq * (u + v) * 0.7071 + phase) > 0.0 ? 1.0 : 0.0;
    case 8:  // checkerboard
      return std::sin(freq * u + phase) * std::sin(freq * v + phase) > 0.0 ? 1.0 : 0.0;
    case 9:  // X
      return (std::abs(u - v) < 0.3 || std::abs(u + v) < 0.3) && r < 0.95 ? 1.0 : 0.0;
    default:
      return 0.0;
  }
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 10) {
    throw ConfigError("dataset.classes", "synthetic corpus supports 2..10 classes");
  }
  if (spec.per_class < 1) throw ConfigError("dataset.per_class", "must be >= 1");
  if (spec.channels != 1 && spec.channels != 3) throw ConfigError("dataset.channels", "must be 1 or 3");
  if (spec.size < 8) throw ConfigError("dataset.size", "must be >= 8");
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.source = "synthetic";
  const int S = spec.size;
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)));
      std::array<double, 3> fg{}, bg{};
      // Foreground and background differ by at least 0.35 in mean intensity.
      do {
        for (int c = 0; c < 3; ++c) {
          fg[c] = rng.uniform();
          bg[c] = rng.uniform();
        }
      } while (std::abs((fg[0] + fg[1] + fg[2]) - (bg[0] + bg[1] + bg[2])) / 3.0 < 0.35);
      const double scale = rng.uniform(0.55, 0.85) * S / 2.0;
      const double cx = (S - 1) / 2.0 + rng.uniform(-0.12, 0.12) * S;
      const double cy = (S - 1) / 2.0 + rng.uniform(-0.12, 0.12) * S;
      const double freq = rng.uniform(4.5, 6.5);
      const double phase = rng.uniform(0.0, 6.283185307179586);
      Image im(spec.channels, S, S);
      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          double cov = 0.0;
          for (int sy = 0; sy < 2; ++sy) {
            for (int sx = 0; sx < 2; ++sx) {
              const double u = (x + 0.25 + 0.5 * sx - cx) / scale;
              const double v = (y + 0.25 + 0.5 * sy - cy) / scale;
              cov += motif(k, u, v, freq, phase);
            }
          }
          cov /= 4.0;
          for (int c = 0; c < spec.channels; ++c) {
            const double f = spec.channels == 1 ? (fg[0] + fg[1] + fg[2]) / 3.0 : fg[c];
            const double b = spec.channels == 1 ? (bg[0] + bg[1] + bg[2]) / 3.0 : bg[c];
            im.at(c, y, x) = cov * f + (1.0 - cov) * b + spec.noise * rng.normal();
          }
        }
      }
      im.clamp01();
      ds.images.push_back(std::move(im));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

}  // namespace ltb::data
