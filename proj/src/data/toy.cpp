// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "vitdae/classifier.hpp"
#include "vitdae/data.hpp"
#include "vitdae/error.hpp"
#include "vitdae/random.hpp"

namespace vitdae {

std::vector<ToyRecipe> default_toy_recipes() {
  return {
      {"blob", "blob", 5.0, 0.0, {0.93, 0.72, 0.85}, 0.03},
      {"stripe", "stripe", 0.0, 2.5, {0.90, 0.45, 0.60}, 0.03},
      {"smooth", "smooth", 0.0, 0.0, {0.78, 0.85, 0.95}, 0.02},
      {"dense", "noise", 0.0, 0.0, {0.45, 0.25, 0.55}, 0.22},
  };
}

namespace {

using Rgb = std::array<double, 3>;

void render(const ToyRecipe& r, int size, Rng& rng, std::vector<Rgb>& img) {
  const double unit = size / 16.0;
  img.assign(static_cast<std::size_t>(size) * size, r.base_hue);
  auto px = [&](int x, int y) -> Rgb& { return img[static_cast<std::size_t>(y) * size + x]; };
  const double jitter = 0.9 + 0.2 * rng.uniform();
  if (r.kind == "blob") {
    for (auto& p : img)
      for (auto& c : p) c *= jitter;
    const int count = std::max(
        1, static_cast<int>(std::lround(r.blob_density * unit * unit * (0.75 + 0.5 * rng.uniform()))));
    for (int b = 0; b < count; ++b) {
      const double cx = rng.uniform() * size, cy = rng.uniform() * size;
      const double rad = (1.2 + rng.uniform()) * unit;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
          const double a = std::clamp(rad + 0.5 - d, 0.0, 1.0);
          for (int c = 0; c < 3; ++c) px(x, y)[c] = (1 - a) * px(x, y)[c] + a * 0.35 * r.base_hue[c];
        }
    }
  } else if (r.kind == "stripe") {
    const double theta = rng.uniform() * std::numbers::pi, phase = rng.uniform() * 2 * std::numbers::pi;
    const double freq = r.stripe_frequency * (0.85 + 0.3 * rng.uniform());
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = (x + 0.5) / size, v = (y + 0.5) / size;
        const double s = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * freq *
                                                  (u * std::cos(theta) + v * std::sin(theta)) + phase);
        for (int c = 0; c < 3; ++c)
          px(x, y)[c] = jitter * r.base_hue[c] * (0.55 + 0.45 * s) + 0.1 * s;
      }
  } else if (r.kind == "smooth") {
    const double ax = rng.uniform() * 2 * std::numbers::pi, ay = rng.uniform() * 2 * std::numbers::pi;
    const double fx = 0.3 + 0.5 * rng.uniform(), fy = 0.3 + 0.5 * rng.uniform();
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = (x + 0.5) / size, v = (y + 0.5) / size;
        const double s = 0.5 + 0.25 * (std::cos(2 * std::numbers::pi * fx * u + ax) +
                                       std::cos(2 * std::numbers::pi * fy * v + ay));
        for (int c = 0; c < 3; ++c) px(x, y)[c] = jitter * r.base_hue[c] * (0.88 + 0.12 * s);
      }
  } else if (r.kind == "noise") {
    for (auto& p : img)
      for (auto& c : p) c *= jitter;
  } else {
    fail(ErrorCode::kConfig, "toy recipe '" + r.name + "': unknown kind '" + r.kind + "'");
  }
  for (auto& p : img) {
    const double shared = rng.normal();
    for (int c = 0; c < 3; ++c)
      p[c] += r.noise_amplitude * (0.7 * shared + 0.3 * rng.normal());
  }
}

bool same_recipe(const ToyRecipe& a, const ToyRecipe& b) {
  return a.kind == b.kind && a.blob_density == b.blob_density &&
         a.stripe_frequency == b.stripe_frequency && a.base_hue == b.base_hue &&
         a.noise_amplitude == b.noise_amplitude;
}

}  // namespace

Dataset generate_toy(const ToySpec& spec) {
  check(spec.classes >= 1, ErrorCode::kConfig, "toy: classes must be positive");
  check(spec.per_class > 0, ErrorCode::kConfig, "toy: per_class must be positive");
  check(spec.resolution >= 4 && spec.resolution % 4 == 0, ErrorCode::kConfig,
        "toy: resolution must be a positive multiple of 4");
  std::vector<ToyRecipe> recipes = spec.recipes;
  if (recipes.empty()) {
    recipes = default_toy_recipes();
    check(spec.classes <= static_cast<int>(recipes.size()), ErrorCode::kConfig,
          "toy: only " + std::to_string(recipes.size()) + " built-in recipes; supply recipes");
    recipes.resize(static_cast<std::size_t>(spec.classes));
  }
  check(static_cast<int>(recipes.size()) == spec.classes, ErrorCode::kConfig,
        "toy: recipe count does not match classes");
  std::set<std::string> names;
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    check(!recipes[i].name.empty() && names.insert(recipes[i].name).second, ErrorCode::kConfig,
          "toy: recipe names must be unique and nonempty");
    for (std::size_t j = 0; j < i; ++j)
      check(!same_recipe(recipes[i], recipes[j]), ErrorCode::kConfig,
            "toy: degenerate recipe collision between '" + recipes[j].name + "' and '" +
                recipes[i].name + "'");
  }

  Dataset data;
  data.channels = 3;
  data.resolution = spec.resolution;
  for (const auto& r : recipes) data.class_names.push_back(r.name);
  std::vector<Rgb> img;
  std::vector<float> chw(data.image_numel());
  const std::size_t hw = static_cast<std::size_t>(spec.resolution) * spec.resolution;
  for (int k = 0; k < spec.classes; ++k) {
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(k) * 1000003ULL + i));
      render(recipes[k], spec.resolution, rng, img);
      // Quantized to 8 bits so that writing and re-ingesting is lossless.
      for (std::size_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) {
          const auto q = static_cast<std::uint8_t>(std::lround(std::clamp(img[p][c], 0.0, 1.0) * 255));
          chw[c * hw + p] = pixel_to_unit(q);
        }
      std::ostringstream id;
      id << recipes[k].name << '_' << std::setw(5) << std::setfill('0') << i;
      data.append(id.str(), k, chw.data());
    }
  }
  data.validate();

  if (spec.self_check && spec.classes >= 2) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < data.size(); ++i) (i % 5 == 4 ? held : train).push_back(i);
    check(!held.empty(), ErrorCode::kConfig, "toy: too few images for the separability check");
    ClassifierConfig cc;
    cc.image_size = spec.resolution;
    cc.classes = spec.classes;
    cc.seed = spec.seed;
    // Small sets get more epochs so the check always sees ~200 updates.
    const std::size_t per_epoch = (train.size() + cc.batch_size - 1) / cc.batch_size;
    cc.epochs = std::max(cc.epochs, static_cast<int>((200 + per_epoch - 1) / per_epoch));
    const ToyClassifier clf = train_classifier(data.subset(train), cc);
    const Dataset test = data.subset(held);
    const auto pred = predict_all(clf, test);
    const double acc = metrics_from_confusion(confusion_matrix(test.labels, pred, spec.classes)).accuracy;
    check(acc > 0.9, ErrorCode::kInternal,
          "toy: classes not separable (held-out accuracy " + std::to_string(acc) + ")");
  }
  return data;
}

}  // namespace vitdae
