// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vitdae/data.hpp"
#include "vitdae/error.hpp"

namespace vitdae {

PngImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    fail(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  PngImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = 3;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string message = img.message;
    png_image_free(&img);
    fail(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const PngImage& image) {
  check(image.channels == 1 || image.channels == 3, ErrorCode::kInvalidArgument,
        "write_png: need 1 or 3 channels");
  check(image.width > 0 && image.height > 0 &&
            image.pixels.size() ==
                static_cast<std::size_t>(image.width) * image.height * image.channels,
        ErrorCode::kShape, "write_png: pixel buffer does not match dimensions");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0, nullptr))
    fail(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + img.message);
}

float pixel_to_unit(std::uint8_t p) { return static_cast<float>(p / 127.5 - 1.0); }

std::uint8_t unit_to_pixel(float v) {
  const double p = std::round((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0));
}

PngImage to_png(const float* chw, int channels, int size) {
  PngImage img;
  img.width = img.height = size;
  img.channels = channels;
  img.pixels.resize(static_cast<std::size_t>(channels) * size * size);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        img.pixels[(static_cast<std::size_t>(y) * size + x) * channels + c] =
            unit_to_pixel(chw[(static_cast<std::size_t>(c) * size + y) * size + x]);
  return img;
}

std::vector<float> prepare_image(const PngImage& image, int resolution) {
  check(resolution >= 1, ErrorCode::kInvalidArgument, "resolution must be positive");
  check(image.width > 0 && image.height > 0, ErrorCode::kInvalidArgument, "empty image");
  const int side = std::min(image.width, image.height);
  const int x0 = (image.width - side) / 2, y0 = (image.height - side) / 2;
  const int ch = image.channels;
  auto at = [&](int x, int y, int c) {
    return static_cast<double>(
        image.pixels[(static_cast<std::size_t>(y0 + y) * image.width + (x0 + x)) * ch + c]);
  };
  const double scale = static_cast<double>(side) / resolution;
  std::vector<float> out(static_cast<std::size_t>(3) * resolution * resolution);
  for (int y = 0; y < resolution; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, side - 1.0);
    const int iy = std::min(static_cast<int>(sy), side - 1), jy = std::min(iy + 1, side - 1);
    const double fy = sy - iy;
    for (int x = 0; x < resolution; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, side - 1.0);
      const int ix = std::min(static_cast<int>(sx), side - 1), jx = std::min(ix + 1, side - 1);
      const double fx = sx - ix;
      for (int c = 0; c < 3; ++c) {
        const int sc = ch == 3 ? c : 0;
        const double v = (1 - fy) * ((1 - fx) * at(ix, iy, sc) + fx * at(jx, iy, sc)) +
                         fy * ((1 - fx) * at(ix, jy, sc) + fx * at(jx, jy, sc));
        out[(static_cast<std::size_t>(c) * resolution + y) * resolution + x] =
            static_cast<float>(v / 127.5 - 1.0);
      }
    }
  }
  return out;
}

}  // namespace vitdae
