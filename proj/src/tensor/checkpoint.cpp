// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vitdae/error.hpp"

namespace vitdae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_le_floats(std::ofstream& out, const std::vector<float>& values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &values[i], 4);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_le_floats(const std::vector<unsigned char>& blob, std::size_t offset,
                                  std::size_t count) {
  check(offset + count * 4 <= blob.size(), ErrorCode::kIo, "parameter blob is truncated");
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(blob[offset + i * 4 + b]) << (8 * b);
    std::memcpy(&values[i], &bits, 4);
  }
  return values;
}

std::vector<unsigned char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path with_suffix(const fs::path& base, const char* ext) {
  return fs::path(base.string() + ext);
}

}  // namespace

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

fs::path checkpoint_base(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".bin" || ext == ".json") return fs::path(path).replace_extension();
  return path;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  const fs::path base = checkpoint_base(path);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  json header;
  header["format"] = "vitdae-params";
  header["version"] = 1;
  header["dtype"] = "float32";
  header["byte_order"] = "little";
  header["blob"] = with_suffix(base, ".bin").filename().string();
  header["meta"] = ckpt.meta;
  json list = json::array();
  std::ofstream blob(with_suffix(base, ".bin"), std::ios::binary);
  check(static_cast<bool>(blob), ErrorCode::kIo, "cannot write " + base.string() + ".bin");
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    check(shape_numel(t.shape) == t.values.size(), ErrorCode::kShape,
          "record " + t.name + " has inconsistent shape");
    list.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset},
                    {"count", t.values.size()}});
    write_le_floats(blob, t.values);
    offset += t.values.size() * 4;
  }
  header["tensors"] = std::move(list);
  write_json(with_suffix(base, ".json"), header);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path base = checkpoint_base(path);
  const json header = read_json(with_suffix(base, ".json"));
  check(header.value("format", "") == "vitdae-params", ErrorCode::kIo,
        base.string() + ".json is not a vitdae parameter header");
  const auto blob = read_all(with_suffix(base, ".bin"));
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", json::object());
  for (const auto& entry : header.at("tensors")) {
    TensorRecord rec;
    rec.name = entry.at("name").get<std::string>();
    rec.shape = entry.at("shape").get<Shape>();
    const auto count = entry.at("count").get<std::size_t>();
    check(count == shape_numel(rec.shape), ErrorCode::kIo, "record " + rec.name + " is corrupt");
    rec.values = read_le_floats(blob, entry.at("offset").get<std::size_t>(), count);
    ckpt.tensors.push_back(std::move(rec));
  }
  return ckpt;
}

template <typename T>
void append_records(Checkpoint& ckpt, const std::string& prefix, const ParameterSet<T>& params) {
  for (const auto& [name, tensor] : params.entries()) {
    auto d = tensor.data();
    ckpt.tensors.push_back({prefix + name, tensor.shape(), std::vector<float>(d.begin(), d.end())});
  }
}

template <typename T>
void restore_records(const Checkpoint& ckpt, const std::string& prefix,
                     const ParameterSet<T>& params) {
  for (const auto& [name, tensor] : params.entries()) {
    const TensorRecord* rec = ckpt.find(prefix + name);
    check(rec != nullptr, ErrorCode::kIo, "checkpoint is missing parameter " + prefix + name);
    check(rec->shape == tensor.shape(), ErrorCode::kShape,
          "checkpoint parameter " + prefix + name + " has shape " + shape_str(rec->shape) +
              ", model expects " + shape_str(tensor.shape()));
    std::copy(rec->values.begin(), rec->values.end(), tensor.data().begin());
  }
}

template void append_records(Checkpoint&, const std::string&, const ParameterSet<float>&);
template void append_records(Checkpoint&, const std::string&, const ParameterSet<double>&);
template void restore_records(const Checkpoint&, const std::string&, const ParameterSet<float>&);
template void restore_records(const Checkpoint&, const std::string&,
                              const ParameterSet<double>&);

void save_features(const fs::path& path, const FeatureFile& features) {
  check(features.values.size() == features.rows * features.dim, ErrorCode::kShape,
        "feature matrix size does not match rows x dim");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  write_le_floats(out, features.values);
  json side = features.sidecar;
  side["n"] = features.rows;
  side["dim"] = features.dim;
  side["dtype"] = "float32";
  side["byte_order"] = "little";
  write_json(with_suffix(path, ".json"), side);
}

FeatureFile load_features(const fs::path& path) {
  FeatureFile f;
  f.sidecar = read_json(with_suffix(path, ".json"));
  f.rows = f.sidecar.at("n").get<std::size_t>();
  f.dim = f.sidecar.at("dim").get<std::size_t>();
  const auto blob = read_all(path);
  check(blob.size() == f.rows * f.dim * 4, ErrorCode::kIo,
        path.string() + " size does not match its sidecar");
  f.values = read_le_floats(blob, 0, f.rows * f.dim);
  return f;
}

}  // namespace vitdae
