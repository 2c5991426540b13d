#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stereosr/tensor.hpp"

namespace ssr {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Reads an 8-bit PNG into (1,3,H,W) with values in [0,1]. Grayscale,
/// palette and alpha variants are expanded/stripped to plain RGB.
template <class T = double>
TensorT<T> read_png(const std::string& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("read_png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png: init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: corrupt file " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_expand(png);  // palette -> rgb, gray<8 -> 8, tRNS -> alpha
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  std::vector<std::uint8_t> row(std::size_t(w) * 3);
  TensorT<T> out = TensorT<T>::zeros({1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(0, c, y, x) = T(row[std::size_t(x) * 3 + c]) / T(255);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

/// Writes (1,3,H,W) or (1,1,H,W) data in [0,1] as an 8-bit PNG; values are
/// clamped and rounded, single-channel input is replicated to gray RGB.
template <class T>
void write_png(const std::string& path, const TensorT<T>& img) {
  const Shape s = img.shape();
  check(s.n == 1 && (s.c == 3 || s.c == 1), "write_png: expected (1,3,H,W) or (1,1,H,W), got " +
                                                to_string(s));
  detail::FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png: init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: write failure " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(s.w), png_uint_32(s.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(std::size_t(s.w) * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const T v = img.at(0, s.c == 3 ? c : 0, y, x);
        const double clamped = std::min(1.0, std::max(0.0, double(v)));
        row[std::size_t(x) * 3 + c] = std::uint8_t(std::lround(clamped * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Writes a PFM ("Pf" single channel, "PF" color), little-endian (negative
/// scale), rows bottom-up as the format requires. float32 payload.
template <class T>
void write_pfm(const std::string& path, const TensorT<T>& img) {
  const Shape s = img.shape();
  check(s.n == 1 && (s.c == 1 || s.c == 3),
        "write_pfm: expected (1,1,H,W) or (1,3,H,W), got " + to_string(s));
  detail::FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("write_pfm: cannot open " + path);
  const std::string header = std::string(s.c == 3 ? "PF" : "Pf") + "\n" + std::to_string(s.w) +
                             " " + std::to_string(s.h) + "\n-1.0\n";
  std::fwrite(header.data(), 1, header.size(), f.get());
  std::vector<std::uint8_t> row(std::size_t(s.w) * s.c * 4);
  for (int y = s.h - 1; y >= 0; --y) {
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < s.c; ++c) {
        const float v = float(img.at(0, c, y, x));
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        const std::size_t o = (std::size_t(x) * s.c + c) * 4;
        row[o] = bits & 0xff;
        row[o + 1] = (bits >> 8) & 0xff;
        row[o + 2] = (bits >> 16) & 0xff;
        row[o + 3] = (bits >> 24) & 0xff;
      }
    std::fwrite(row.data(), 1, row.size(), f.get());
  }
}

template <class T = double>
TensorT<T> read_pfm(const std::string& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("read_pfm: cannot open " + path);
  auto token = [&] {
    std::string t;
    int ch;
    while ((ch = std::fgetc(f.get())) != EOF && std::isspace(ch)) {
    }
    if (ch == EOF) throw std::runtime_error("read_pfm: truncated header in " + path);
    t.push_back(char(ch));
    while ((ch = std::fgetc(f.get())) != EOF && !std::isspace(ch)) t.push_back(char(ch));
    return t;
  };
  const std::string magic = token();
  if (magic != "Pf" && magic != "PF")
    throw std::runtime_error("read_pfm: bad magic '" + magic + "' in " + path);
  const int channels = magic == "PF" ? 3 : 1;
  const int w = std::stoi(token());
  const int h = std::stoi(token());
  const double scale = std::stod(token());
  const bool little = scale < 0;
  TensorT<T> out = TensorT<T>::zeros({1, channels, h, w});
  std::vector<std::uint8_t> row(std::size_t(w) * channels * 4);
  for (int y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), 1, row.size(), f.get()) != row.size())
      throw std::runtime_error("read_pfm: truncated data in " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t o = (std::size_t(x) * channels + c) * 4;
        std::uint32_t bits;
        if (little)
          bits = std::uint32_t(row[o]) | (std::uint32_t(row[o + 1]) << 8) |
                 (std::uint32_t(row[o + 2]) << 16) | (std::uint32_t(row[o + 3]) << 24);
        else
          bits = std::uint32_t(row[o + 3]) | (std::uint32_t(row[o + 2]) << 8) |
                 (std::uint32_t(row[o + 1]) << 16) | (std::uint32_t(row[o]) << 24);
        float v;
        std::memcpy(&v, &bits, 4);
        out.at(0, c, y, x) = T(v);
      }
  }
  return out;
}

}  // namespace ssr
