// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/data/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cm3ae {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t quantize(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

void write_png(const std::string& path, int width, int height, int color_type, const std::vector<uint8_t>& pixels,
               int stride) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * stride);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void read_png(const std::string& path, int& width, int& height, std::vector<uint8_t>& pixels, bool want_rgb) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read error (corrupt file?): " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);  // palette -> rgb, gray<8 -> 8, tRNS -> alpha
  png_set_strip_alpha(png);
  if (want_rgb) {
    png_set_gray_to_rgb(png);
  } else {
    const int ct = png_get_color_type(png, info);
    if (ct != PNG_COLOR_TYPE_GRAY && ct != PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
  }
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * static_cast<size_t>(height));
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<size_t>(y)] = pixels.data() + static_cast<size_t>(y) * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const size_t expect = static_cast<size_t>(width) * (want_rgb ? 3 : 1);
  if (stride != expect) throw std::runtime_error("unexpected png layout in " + path);
}

}  // namespace

void write_png_rgb(const ImageArray& image, const std::string& path) {
  if (image.channels != 3) throw std::invalid_argument("write_png_rgb: image must have 3 channels");
  std::vector<uint8_t> pixels(static_cast<size_t>(image.height) * image.width * 3);
  for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(image.values[i]);
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, pixels, image.width * 3);
}

void write_png_gray(const Mat<float>& values, const std::string& path) {
  std::vector<uint8_t> pixels(values.size());
  for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(values.data[i]);
  write_png(path, values.cols, values.rows, PNG_COLOR_TYPE_GRAY, pixels, values.cols);
}

ImageArray read_png_rgb(const std::string& path) {
  int w = 0, h = 0;
  std::vector<uint8_t> pixels;
  read_png(path, w, h, pixels, /*want_rgb=*/true);
  ImageArray out(h, w, 3);
  for (size_t i = 0; i < pixels.size(); ++i) out.values[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

Mat<float> read_png_gray(const std::string& path) {
  int w = 0, h = 0;
  std::vector<uint8_t> pixels;
  read_png(path, w, h, pixels, /*want_rgb=*/false);
  Mat<float> out(h, w);
  for (size_t i = 0; i < pixels.size(); ++i) out.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

}  // namespace cm3ae
