// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <iostream>
#include <set>

#include "vitdae/data.hpp"
#include "vitdae/error.hpp"

namespace vitdae {

namespace fs = std::filesystem;

void Dataset::validate() const {
  check(channels >= 1 && resolution >= 1, ErrorCode::kInvalidArgument,
        "dataset: bad image geometry");
  check(ids.size() == labels.size() && pixels.size() == labels.size() * image_numel(),
        ErrorCode::kShape, "dataset: pixel, label and id counts disagree");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i] >= 0 && labels[i] < class_count(), ErrorCode::kInvalidArgument,
          "dataset: label " + std::to_string(labels[i]) + " outside class range");
    check(seen.insert(ids[i]).second, ErrorCode::kInvalidArgument,
          "dataset: duplicate id " + ids[i]);
  }
}

Tensor<float> Dataset::batch(const std::vector<std::size_t>& indices) const {
  const std::size_t n = image_numel();
  std::vector<float> out(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    check(indices[i] < size(), ErrorCode::kInvalidArgument, "dataset: index out of range");
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  const auto r = static_cast<std::size_t>(resolution);
  return Tensor<float>({indices.size(), static_cast<std::size_t>(channels), r, r}, std::move(out));
}

Tensor<float> Dataset::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

std::vector<int> Dataset::labels_of(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

std::vector<std::size_t> Dataset::indices_of_class(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) out.push_back(i);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.channels = channels;
  out.resolution = resolution;
  out.class_names = class_names;
  for (auto i : indices) {
    check(i < size(), ErrorCode::kInvalidArgument, "dataset: index out of range");
    out.append(ids[i], labels[i], pixels.data() + i * image_numel());
  }
  return out;
}

void Dataset::append(const std::string& id, int label, const float* image) {
  ids.push_back(id);
  labels.push_back(label);
  pixels.insert(pixels.end(), image, image + image_numel());
}

namespace {

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

}  // namespace

Dataset ingest(const fs::path& dir, int resolution, IngestReport* report) {
  check(resolution >= 1, ErrorCode::kInvalidArgument, "ingest: resolution must be positive");
  check(fs::is_directory(dir), ErrorCode::kIo, "ingest: not a directory: " + dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  check(!class_dirs.empty(), ErrorCode::kInvalidArgument,
        "no classes found in " + dir.string());

  Dataset data;
  data.channels = 3;
  data.resolution = resolution;
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  for (const auto& cdir : class_dirs) {
    const int label = data.class_count();
    const std::string name = cdir.filename().string();
    data.class_names.push_back(name);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cdir))
      if (e.is_regular_file() && is_png(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::size_t loaded = 0;
    for (const auto& f : files) {
      std::vector<float> img;
      try {
        img = prepare_image(read_png(f), resolution);
      } catch (const Error& e) {
        std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
        ++rep.skipped;
        rep.skipped_paths.push_back(f.string());
        continue;
      }
      data.append(name + "/" + f.stem().string(), label, img.data());
      ++loaded;
      ++rep.loaded;
    }
    check(loaded > 0, ErrorCode::kInvalidArgument, "ingest: class '" + name + "' has no images");
  }
  data.validate();
  return data;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  data.validate();
  fs::create_directories(dir);
  for (const auto& name : data.class_names) fs::create_directories(dir / name);
  for (std::size_t i = 0; i < data.size(); ++i) {
    // Ids may carry a "<class>/" prefix from ingestion.
    std::string stem = data.ids[i];
    if (auto slash = stem.rfind('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    write_png(dir / data.class_names[data.labels[i]] / (stem + ".png"),
              to_png(data.pixels.data() + i * data.image_numel(), data.channels, data.resolution));
  }
}

}  // namespace vitdae
