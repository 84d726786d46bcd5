// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Labelled image sets, PNG I/O, directory ingestion and the procedural toy
// dataset generator.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/tensor.hpp"

namespace vitdae {

// N images of shape [channels, resolution, resolution] in [-1, 1], stored
// contiguously.
struct Dataset {
  int channels = 3;
  int resolution = 16;
  std::vector<std::string> class_names;
  std::vector<float> pixels;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const {
    return static_cast<std::size_t>(channels) * resolution * resolution;
  }
  int class_count() const { return static_cast<int>(class_names.size()); }

  // Checks uniform sizes, label range and id uniqueness.
  void validate() const;
  // [indices.size(), C, H, W].
  Tensor<float> batch(const std::vector<std::size_t>& indices) const;
  Tensor<float> all() const;
  std::vector<int> labels_of(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> indices_of_class(int label) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  void append(const std::string& id, int label, const float* image);
};

// 8-bit interleaved image, rows top to bottom.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
};

// Any PNG color type / bit depth is converted to 8-bit RGB.
PngImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngImage& image);

// [-1, 1] CHW floats <-> 8-bit: v = p / 127.5 - 1 and p = round((v + 1) * 127.5).
float pixel_to_unit(std::uint8_t p);
std::uint8_t unit_to_pixel(float v);
PngImage to_png(const float* chw, int channels, int size);

// Center crop to a square, bilinear resize (half-pixel centers), map to
// [-1, 1]. Output is CHW.
std::vector<float> prepare_image(const PngImage& image, int resolution);

struct IngestReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skipped_paths;
};

// `dir/<class>/*.png`, classes and files in lexicographic order.
Dataset ingest(const std::filesystem::path& dir, int resolution, IngestReport* report = nullptr);

// Writes `dir/<class>/<id>.png`.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

struct ToyRecipe {
  std::string name;
  std::string kind;  // blob | stripe | smooth | noise
  double blob_density = 0;     // blobs per 16x16 area
  double stripe_frequency = 0; // cycles across the image
  std::array<double, 3> base_hue{0, 0, 0};  // RGB in [0, 1]
  double noise_amplitude = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ToyRecipe, name, kind, blob_density,
                                                stripe_frequency, base_hue, noise_amplitude)

struct ToySpec {
  int classes = 4;
  std::vector<ToyRecipe> recipes;  // empty: the first `classes` built-in recipes
  int resolution = 16;
  int per_class = 400;
  std::uint64_t seed = 0;
  bool self_check = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ToySpec, classes, recipes, resolution, per_class,
                                                seed, self_check)

// nuclei-like blobs, stroma-like stripes, mucus-like smooth fields and
// tumor-like dense noise.
std::vector<ToyRecipe> default_toy_recipes();

// Deterministic per seed. With self_check, a freshly trained toy classifier
// must exceed 90% accuracy on a held-out fifth of the set.
Dataset generate_toy(const ToySpec& spec);

}  // namespace vitdae
