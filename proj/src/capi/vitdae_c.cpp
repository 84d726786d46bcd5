// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/vitdae.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "vitdae/commands.hpp"
#include "vitdae/data.hpp"
#include "vitdae/error.hpp"
#include "vitdae/pipeline.hpp"

struct vitdae_dataset {
  vitdae::Dataset data;
};

struct vitdae_stage1 {
  vitdae::Stage1Model model;
};

struct vitdae_latent {
  vitdae::LatentModel model;
};

namespace {

using json = nlohmann::json;

thread_local std::string g_last_error;

template <typename F>
vitdae_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return VITDAE_OK;
  } catch (const vitdae::Error& e) {
    g_last_error = e.what();
    return static_cast<vitdae_status>(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return VITDAE_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VITDAE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VITDAE_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  vitdae::check(p != nullptr, vitdae::ErrorCode::kInvalidArgument,
                std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    vitdae::fail(vitdae::ErrorCode::kConfig, std::string("invalid JSON: ") + e.what());
  }
}

vitdae::Tensor<float> image_tensor(const vitdae::Stage1Model& m, const float* images, size_t n) {
  const auto c = static_cast<std::size_t>(m.unet_config.in_channels);
  const auto s = static_cast<std::size_t>(m.unet_config.image_size);
  return vitdae::Tensor<float>({n, c, s, s}, std::vector<float>(images, images + n * c * s * s));
}

vitdae::TrainConfig parse_train_config(const char* text) {
  json j = parse_json(text);
  j.erase("run_dir");
  j.erase("stage1");
  return j.get<vitdae::TrainConfig>();
}

}  // namespace

extern "C" {

const char* vitdae_version(void) { return "0.1.0"; }

const char* vitdae_last_error(void) { return g_last_error.c_str(); }

const char* vitdae_status_name(vitdae_status status) {
  switch (status) {
    case VITDAE_OK: return "ok";
    case VITDAE_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case VITDAE_ERR_SHAPE: return "shape";
    case VITDAE_ERR_IO: return "io";
    case VITDAE_ERR_CONFIG: return "config";
    case VITDAE_ERR_STATE: return "state";
    case VITDAE_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void vitdae_string_free(char* s) { std::free(s); }

size_t vitdae_command_count(void) { return vitdae::command_names().size(); }

const char* vitdae_command_name(size_t index) {
  const auto& names = vitdae::command_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

vitdae_status vitdae_command_config(const char* command, const char* config_json,
                                    const char* const* override_keys,
                                    const char* const* override_values, size_t override_count,
                                    char** effective_json) {
  return guarded([&] {
    need(command, "command");
    need(effective_json, "effective_json");
    std::vector<std::pair<std::string, std::string>> overrides;
    if (override_count > 0) {
      need(override_keys, "override_keys");
      need(override_values, "override_values");
    }
    for (size_t i = 0; i < override_count; ++i) {
      need(override_keys[i], "override key");
      need(override_values[i], "override value");
      overrides.emplace_back(override_keys[i], override_values[i]);
    }
    const json file = config_json ? parse_json(config_json) : json();
    *effective_json = dup_string(vitdae::effective_config(command, file, overrides).dump(2));
  });
}

vitdae_status vitdae_command_run(const char* command, const char* effective_json,
                                 char** result_json) {
  return guarded([&] {
    need(command, "command");
    need(result_json, "result_json");
    *result_json = nullptr;
    *result_json = dup_string(vitdae::run_command(command, parse_json(effective_json)).dump(2));
  });
}

vitdae_status vitdae_dataset_ingest(const char* dir, int resolution, vitdae_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new vitdae_dataset{vitdae::ingest(dir, resolution)};
  });
}

vitdae_status vitdae_dataset_toy(const char* spec_json, vitdae_dataset** out) {
  return guarded([&] {
    need(out, "out");
    *out = new vitdae_dataset{vitdae::generate_toy(parse_json(spec_json).get<vitdae::ToySpec>())};
  });
}

vitdae_status vitdae_dataset_write(const vitdae_dataset* data, const char* dir) {
  return guarded([&] {
    need(data, "data");
    need(dir, "dir");
    vitdae::write_dataset(data->data, dir);
  });
}

vitdae_status vitdae_dataset_info(const vitdae_dataset* data, size_t* count, int* channels,
                                  int* resolution, int* classes) {
  return guarded([&] {
    need(data, "data");
    if (count) *count = data->data.size();
    if (channels) *channels = data->data.channels;
    if (resolution) *resolution = data->data.resolution;
    if (classes) *classes = data->data.class_count();
  });
}

vitdae_status vitdae_dataset_pixels(const vitdae_dataset* data, const float** pixels,
                                    const int** labels) {
  return guarded([&] {
    need(data, "data");
    if (pixels) *pixels = data->data.pixels.data();
    if (labels) *labels = data->data.labels.data();
  });
}

vitdae_status vitdae_dataset_class_name(const vitdae_dataset* data, int label, const char** name) {
  return guarded([&] {
    need(data, "data");
    need(name, "name");
    vitdae::check(label >= 0 && label < data->data.class_count(),
                  vitdae::ErrorCode::kInvalidArgument, "label out of range");
    *name = data->data.class_names[static_cast<std::size_t>(label)].c_str();
  });
}

void vitdae_dataset_free(vitdae_dataset* data) { delete data; }

vitdae_status vitdae_stage1_create(const char* train_config_json, vitdae_stage1** out) {
  return guarded([&] {
    need(out, "out");
    vitdae::TrainConfig cfg = parse_train_config(train_config_json);
    cfg.validate();
    auto* h = new vitdae_stage1{vitdae::Stage1Model(cfg.encoder, cfg.unet, cfg.schedule)};
    vitdae::Rng rng(vitdae::Rng::derive(cfg.seed, 0));
    h->model.init(rng);
    *out = h;
  });
}

vitdae_status vitdae_stage1_load(const char* path, vitdae_stage1** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new vitdae_stage1{vitdae::load_stage1(path)};
  });
}

vitdae_status vitdae_stage1_save(const vitdae_stage1* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    vitdae::save_stage1(path, model->model);
  });
}

vitdae_status vitdae_stage1_info(const vitdae_stage1* model, int* channels, int* resolution,
                                 int* code_dim) {
  return guarded([&] {
    need(model, "model");
    if (channels) *channels = model->model.unet_config.in_channels;
    if (resolution) *resolution = model->model.unet_config.image_size;
    if (code_dim) *code_dim = model->model.encoder_config.code_dim;
  });
}

vitdae_status vitdae_stage1_train(vitdae_stage1* model, const char* train_config_json,
                                  const vitdae_dataset* data, double* final_loss) {
  return guarded([&] {
    need(model, "model");
    need(data, "data");
    vitdae::TrainConfig cfg = parse_train_config(train_config_json);
    cfg.encoder = model->model.encoder_config;
    cfg.unet = model->model.unet_config;
    cfg.schedule = model->model.schedule;
    cfg.latent.code_dim = cfg.encoder.code_dim;
    const auto result = vitdae::train_stage1(model->model, cfg, data->data);
    if (final_loss) *final_loss = result.losses.back().loss;
  });
}

vitdae_status vitdae_stage1_encode(const vitdae_stage1* model, const float* images, size_t n,
                                   float* codes) {
  return guarded([&] {
    need(model, "model");
    if (n == 0) return;
    need(images, "images");
    need(codes, "codes");
    const auto z = model->model.encode(image_tensor(model->model, images, n));
    std::copy(z.data().begin(), z.data().end(), codes);
  });
}

vitdae_status vitdae_stage1_decode(const vitdae_stage1* model, const float* codes, size_t n,
                                   uint64_t seed, int steps, float* images) {
  return guarded([&] {
    need(model, "model");
    if (n == 0) return;
    need(codes, "codes");
    need(images, "images");
    const auto d = static_cast<std::size_t>(model->model.encoder_config.code_dim);
    vitdae::SampleConfig sc;
    sc.image_steps = steps;
    const auto x = vitdae::decode_codes(
        model->model, vitdae::Tensor<float>({n, d}, std::vector<float>(codes, codes + n * d)),
        seed, sc);
    std::copy(x.data().begin(), x.data().end(), images);
  });
}

vitdae_status vitdae_stage1_reconstruct(const vitdae_stage1* model, const float* images, size_t n,
                                        int steps, float* out, double* mse) {
  return guarded([&] {
    need(model, "model");
    need(images, "images");
    const auto r = vitdae::reconstruct(model->model, image_tensor(model->model, images, n), steps);
    if (out) std::copy(r.images.data().begin(), r.images.data().end(), out);
    if (mse) *mse = r.mse;
  });
}

void vitdae_stage1_free(vitdae_stage1* model) { delete model; }

vitdae_status vitdae_latent_load(const char* path, vitdae_latent** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new vitdae_latent{vitdae::load_latent(path)};
  });
}

vitdae_status vitdae_latent_info(const vitdae_latent* model, int* label, const char** class_name,
                                 int* code_dim) {
  return guarded([&] {
    need(model, "model");
    if (label) *label = model->model.label;
    if (class_name) *class_name = model->model.class_name.c_str();
    if (code_dim) *code_dim = model->model.config.code_dim;
  });
}

void vitdae_latent_free(vitdae_latent* model) { delete model; }

vitdae_status vitdae_generate(const vitdae_stage1* stage1, const vitdae_latent* latent, size_t n,
                              uint64_t seed, int image_steps, int latent_steps, float* images) {
  return guarded([&] {
    need(stage1, "stage1");
    need(latent, "latent");
    vitdae::SampleConfig sc;
    sc.image_steps = image_steps;
    sc.latent_steps = latent_steps;
    const auto x = vitdae::generate(stage1->model, latent->model, n, seed, sc);
    if (n == 0) return;
    need(images, "images");
    std::copy(x.data().begin(), x.data().end(), images);
  });
}

}  // extern "C"
