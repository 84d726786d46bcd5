// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Parameter blobs: `<base>.bin` holds little-endian float32 arrays back to
// back; `<base>.json` lists each tensor's name, shape and byte offset plus a
// free-form "meta" object (model configs, class labels, normalization stats).

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/nn.hpp"

namespace vitdae {

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const;
};

// `base` may be given with or without the .bin/.json extension.
std::filesystem::path checkpoint_base(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& base, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& base);

// Appends `prefix + name` records for every parameter.
template <typename T>
void append_records(Checkpoint& ckpt, const std::string& prefix, const ParameterSet<T>& params);

// Copies values of `prefix + name` records into the set; shapes must match
// and every parameter must be present.
template <typename T>
void restore_records(const Checkpoint& ckpt, const std::string& prefix,
                     const ParameterSet<T>& params);

// Flat float32 feature matrix with a JSON sidecar {n, dim, extractor, ...}.
struct FeatureFile {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  nlohmann::json sidecar = nlohmann::json::object();
};

void save_features(const std::filesystem::path& path, const FeatureFile& features);
FeatureFile load_features(const std::filesystem::path& path);

}  // namespace vitdae
