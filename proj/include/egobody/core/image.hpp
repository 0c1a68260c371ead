#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "egobody/core/error.hpp"
#include "egobody/core/hash.hpp"

namespace egobody {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit sRGB image, row-major, interleaved RGB.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    require(w >= 0 && h >= 0, "image dimensions must be non-negative");
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill[0];
      pixels[i + 1] = fill[1];
      pixels[i + 2] = fill[2];
    }
  }

  std::size_t offset(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  std::uint8_t* at(int x, int y) { return pixels.data() + offset(x, y); }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + offset(x, y); }
  Rgb rgb(int x, int y) const {
    const auto* p = at(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool empty() const { return width == 0 || height == 0; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image& o) const = default;

  std::uint64_t hash() const {
    Fnv1a h;
    h.update(&width, sizeof(width));
    h.update(&height, sizeof(height));
    h.update(pixels.data(), pixels.size());
    return h.digest();
  }
};

/// Copy of the w x h block starting at (x0, y0).
inline Image crop(const Image& src, int x0, int y0, int w, int h) {
  require(x0 >= 0 && y0 >= 0 && w >= 0 && h >= 0 && x0 + w <= src.width && y0 + h <= src.height,
          "crop window outside image");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(src.at(x0, y0 + y), static_cast<std::size_t>(w) * 3, out.at(0, y));
  return out;
}

inline void paste(Image& dst, const Image& src, int x0, int y0) {
  require(x0 >= 0 && y0 >= 0 && x0 + src.width <= dst.width && y0 + src.height <= dst.height,
          "paste window outside image");
  for (int y = 0; y < src.height; ++y)
    std::copy_n(src.at(0, y), static_cast<std::size_t>(src.width) * 3, dst.at(x0, y0 + y));
}

/// `top` above `bottom`; widths must match.
inline Image vstack(const Image& top, const Image& bottom) {
  require(top.width == bottom.width, "vstack: width mismatch");
  Image out(top.width, top.height + bottom.height);
  paste(out, top, 0, 0);
  paste(out, bottom, 0, top.height);
  return out;
}

inline Image hstack(const Image& left, const Image& right) {
  require(left.height == right.height, "hstack: height mismatch");
  Image out(left.width + right.width, left.height);
  paste(out, left, 0, 0);
  paste(out, right, left.width, 0);
  return out;
}

/// 90 degrees clockwise: output is (height x width).
inline Image rotate90_cw(const Image& src) {
  Image out(src.height, src.width);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.set(src.height - 1 - y, x, src.rgb(x, y));
  return out;
}

inline Image rotate90_ccw(const Image& src) {
  Image out(src.height, src.width);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.set(y, src.width - 1 - x, src.rgb(x, y));
  return out;
}

/// Bilinear resample with pixel-center alignment.
inline Image resize_bilinear(const Image& src, int w, int h) {
  require(!src.empty() && w > 0 && h > 0, "resize: empty image");
  if (src.width == w && src.height == h) return src;
  Image out(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double tx = fx - x0;
      auto* o = out.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double a = src.at(x0, y0)[c] * (1 - tx) + src.at(x1, y0)[c] * tx;
        const double b = src.at(x0, y1)[c] * (1 - tx) + src.at(x1, y1)[c] * tx;
        o[c] = static_cast<std::uint8_t>(std::clamp(std::lround(a * (1 - ty) + b * ty), 0L, 255L));
      }
    }
  }
  return out;
}

/// Count of pixels that differ from `bg` in any channel.
inline std::size_t count_foreground(const Image& img, Rgb bg) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3)
    if (img.pixels[i] != bg[0] || img.pixels[i + 1] != bg[1] || img.pixels[i + 2] != bg[2]) ++n;
  return n;
}

// --- PNG --------------------------------------------------------------------

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// 8-bit RGB, no alpha, no ancillary chunks; output is byte-deterministic.
inline void write_png(const std::filesystem::path& path, const Image& img) {
  require(!img.empty(), "write_png: empty image");
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw std::runtime_error("png write failed: " + path.string());
}

/// Reads any 8/16-bit gray/RGB/RGBA/palette PNG and converts it to 8-bit RGB.
inline Image read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw std::runtime_error("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace egobody
