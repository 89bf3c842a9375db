/* Copyright 2026 The JD3Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Image files <-> (1, C, H, W) tensors in [0, 1]. PNG (8/16-bit gray or
// RGB, needs libpng), PFM, and the native .tensor format, chosen by extension.

#ifndef JD3_IMAGE_IO_HPP_
#define JD3_IMAGE_IO_HPP_

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "jd3/tensor.hpp"

namespace jd3 {

enum class ImageFormat { png, pfm, tensor };

inline ImageFormat image_format_for(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".pfm") return ImageFormat::pfm;
  if (ext == ".tensor") return ImageFormat::tensor;
  throw FormatError("unsupported image extension '" + ext + "' (png, pfm, tensor)");
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_fail(png_structp, png_const_charp msg) { throw FormatError(std::string("png: ") + msg); }
inline void png_warn(png_structp, png_const_charp) {}

}  // namespace detail

template <Real T>
Tensor<T> load_png(const std::string& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FormatError("cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw FormatError(path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_fail, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const std::size_t h = png_get_image_height(png, info), w = png_get_image_width(png, info);
  const std::size_t ch = png_get_channels(png, info);
  const int bits = png_get_bit_depth(png, info);
  if (ch != 1 && ch != 3) throw FormatError("png: unsupported channel count " + std::to_string(ch));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());

  Tensor<T> out(Shape{1, ch, h, w});
  const double scale = bits == 16 ? 65535.0 : 255.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ch; ++c) {
        double v;
        if (bits == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * (x * ch + c), 2);
          v = s;
        } else {
          v = rows[y][x * ch + c];
        }
        out(0, c, y, x) = static_cast<T>(v / scale);
      }
  return out;
}

/// Values are clamped to [0, 1] and rounded to the nearest code.
template <Real T>
void save_png(const std::string& path, const Tensor<T>& t, int bits = 8) {
  const Shape& s = t.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) throw ShapeError("save_png: need shape (1, 1|3, H, W), got " + s.str());
  if (bits != 8 && bits != 16) throw std::invalid_argument("save_png: bits must be 8 or 16");
  detail::FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw FormatError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_fail, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), bits,
               s.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // no timestamps or text chunks, so output bytes depend only on pixels
  png_write_info(png, info);
  if (bits == 16) png_set_swap(png);
  const double scale = bits == 16 ? 65535.0 : 255.0;
  const std::size_t bpc = static_cast<std::size_t>(bits / 8);
  std::vector<png_byte> row(s.w * s.c * bpc);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double v = std::clamp(static_cast<double>(t(0, c, y, x)), 0.0, 1.0);
        const auto code = static_cast<std::uint16_t>(std::lround(v * scale));
        if (bits == 16)
          std::memcpy(row.data() + 2 * (x * s.c + c), &code, 2);
        else
          row[x * s.c + c] = static_cast<png_byte>(code);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

/// Portable float map; rows are stored bottom to top, little-endian.
template <Real T>
void save_pfm(const std::string& path, const Tensor<T>& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) throw ShapeError("save_pfm: need shape (1, 1|3, H, W), got " + s.str());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << (s.c == 3 ? "PF" : "Pf") << "\n" << s.w << " " << s.h << "\n-1.0\n";
  for (std::size_t yy = 0; yy < s.h; ++yy) {
    const std::size_t y = s.h - 1 - yy;
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < s.c; ++c) {
        const float v = static_cast<float>(t(0, c, y, x));
        detail::put_le(os, std::bit_cast<std::uint32_t>(v));
      }
  }
}

template <Real T>
Tensor<T> load_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::string magic;
  std::size_t w = 0, h = 0;
  double scale = 0;
  is >> magic >> w >> h >> scale;
  if (!is || (magic != "PF" && magic != "Pf") || w == 0 || h == 0 || scale == 0)
    throw FormatError(path + " is not a PFM file");
  is.get();
  const std::size_t ch = magic == "PF" ? 3 : 1;
  const bool little = scale < 0;
  Tensor<T> out(Shape{1, ch, h, w});
  for (std::size_t yy = 0; yy < h; ++yy) {
    const std::size_t y = h - 1 - yy;
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ch; ++c) {
        unsigned char b[4];
        if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated PFM payload");
        if (!little) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
        std::uint32_t u = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
                          static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
        out(0, c, y, x) = static_cast<T>(std::bit_cast<float>(u));
      }
  }
  return out;
}

template <Real T>
Tensor<T> load_image(const std::string& path) {
  switch (image_format_for(path)) {
    case ImageFormat::png: return load_png<T>(path);
    case ImageFormat::pfm: return load_pfm<T>(path);
    default: return load_tensor<T>(path);
  }
}

template <Real T>
void save_image(const std::string& path, const Tensor<T>& t) {
  switch (image_format_for(path)) {
    case ImageFormat::png: save_png(path, t, 16); break;
    case ImageFormat::pfm: save_pfm(path, t); break;
    default: save_tensor(path, t);
  }
}

}  // namespace jd3

#endif  // JD3_IMAGE_IO_HPP_
