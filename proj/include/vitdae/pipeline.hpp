// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Two-stage training (encoder + conditional UNet, then latent denoisers over
// frozen codes), generative sampling, reconstruction and run directories.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/data.hpp"
#include "vitdae/diffusion.hpp"
#include "vitdae/encoder.hpp"
#include "vitdae/latent.hpp"
#include "vitdae/unet.hpp"

namespace vitdae {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScheduleConfig, steps, beta_min, beta_max, kind)

struct TrainConfig {
  int stage = 1;
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between intermediate checkpoints; 0: final only
  std::string dataset;       // directory of class subfolders
  std::vector<std::string> class_filter;  // stage 2: restrict to these classes
  bool per_class = true;     // stage 2: one latent model per class
  bool zero_condition = false;  // stage 1 ablation: codes replaced by zeros
  double ema_decay = 0.0;       // 0 disables the parameter EMA
  std::string latent_objective = "l1";  // stage 2: "l1" or "l2"
  ViTConfig encoder;
  UNetConfig unet;
  LatentConfig latent;
  ScheduleConfig schedule;

  void validate() const;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, stage, epochs, batch_size, lr, beta1,
                                                beta2, adam_eps, grad_clip, seed, checkpoint_every,
                                                dataset, class_filter, per_class, zero_condition,
                                                ema_decay, latent_objective, encoder, unet,
                                                latent, schedule)

// Encoder, noise predictor and code statistics trained together in stage 1.
struct Stage1Model {
  ViTConfig encoder_config;
  UNetConfig unet_config;
  ScheduleConfig schedule;
  ViTEncoder<float> encoder;
  UNet<float> unet;
  std::optional<CodeStats> stats;

  Stage1Model(ViTConfig enc, UNetConfig unet, ScheduleConfig sched);
  void init(Rng& rng);
  NoiseSchedule noise_schedule() const { return make_schedule(schedule); }
  NoiseFn<float> noise_fn() const;
  Tensor<float> encode(const Tensor<float>& images) const;  // no gradient, batched
};

struct LatentModel {
  LatentConfig config;
  ScheduleConfig schedule;
  int label = -1;  // -1: trained on every class
  std::string class_name;
  LatentDenoiser<float> net;

  LatentModel(LatentConfig cfg, ScheduleConfig sched);
};

void save_stage1(const std::filesystem::path& base, const Stage1Model& model);
Stage1Model load_stage1(const std::filesystem::path& base);
void save_latent(const std::filesystem::path& base, const LatentModel& model);
LatentModel load_latent(const std::filesystem::path& base);

struct EpochLoss {
  int epoch = 0;
  double loss = 0;
};

struct Stage1Result {
  std::vector<EpochLoss> losses;
  std::size_t images = 0;
};

// Per-epoch hook, e.g. for intermediate checkpoints.
using EpochHook = std::function<void(int epoch, double loss)>;

Stage1Result train_stage1(Stage1Model& model, const TrainConfig& cfg, const Dataset& data,
                          const EpochHook& hook = {});

struct LatentRun {
  LatentModel model;
  std::vector<EpochLoss> losses;
  std::size_t codes = 0;
};

struct Stage2Result {
  std::vector<LatentRun> runs;
  std::uint64_t encoder_hash_before = 0;
  std::uint64_t encoder_hash_after = 0;
};

// Codes come from the frozen stage-1 encoder and are normalized with its
// stats. Fails if the encoder changes.
Stage2Result train_stage2(const Stage1Model& stage1, const TrainConfig& cfg, const Dataset& data);

// Normalized codes of every image, [N, d].
Tensor<float> dataset_codes(const Stage1Model& model, const Dataset& data);

struct SampleConfig {
  int image_steps = 50;
  int latent_steps = 50;
  bool clip = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SampleConfig, image_steps, latent_steps, clip)

// Samples normalized codes from the latent model, unnormalizes them, draws
// x_T ~ N(0, I) and decodes. Returns [n, C, H, W] in [-1, 1].
Tensor<float> generate(const Stage1Model& stage1, const LatentModel& latent, std::size_t n,
                       std::uint64_t seed, const SampleConfig& sample = {});

// Decodes given codes (unnormalized) from noise drawn with `seed`.
Tensor<float> decode_codes(const Stage1Model& stage1, const Tensor<float>& codes,
                           std::uint64_t seed, const SampleConfig& sample = {});

struct Reconstruction {
  Tensor<float> images;
  Tensor<float> noise;  // x_T from deterministic encoding
  double mse = 0;
};

// Deterministic encode to x_T under each image's own code, then decode.
Reconstruction reconstruct(const Stage1Model& stage1, const Tensor<float>& images, int steps);

// Stable 64-bit FNV-1a over bytes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t hash_values(const std::vector<float>& values);
std::string hex64(std::uint64_t v);
std::uint64_t config_hash(const nlohmann::json& config);

// Run directory: config.json, manifest.json (append-only list of stage
// records), checkpoints/, samples/, losses.csv.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
  std::filesystem::path samples() const { return root_ / "samples"; }

  void write_config(const nlohmann::json& config) const;
  nlohmann::json manifest() const;
  // Adds `config_hash` from entry["config"] and appends.
  void append_manifest(nlohmann::json entry) const;
  void append_losses(const std::string& series, const std::vector<EpochLoss>& losses) const;

 private:
  std::filesystem::path root_;
};

// Writes images [N,C,H,W] as `dir/<prefix><index>.png`.
void write_images(const Tensor<float>& images, const std::filesystem::path& dir,
                  const std::string& prefix = "");

}  // namespace vitdae
