// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// 8x8 configuration small enough to train in seconds.

#pragma once

#include "vitdae/data.hpp"
#include "vitdae/pipeline.hpp"

namespace vitdae::testing {

inline TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = 2e-3;
  cfg.seed = 1;
  cfg.encoder.image_size = 8;
  cfg.encoder.patch_size = 2;
  cfg.encoder.embed_dim = 32;
  cfg.encoder.depth = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.code_dim = 16;
  cfg.unet.image_size = 8;
  cfg.unet.base_channels = 16;
  cfg.unet.channel_mults = {1, 2};
  cfg.unet.res_blocks = 1;
  cfg.unet.attention_resolutions = {4};
  cfg.unet.attention_heads = 2;
  cfg.unet.time_dim = 32;
  cfg.unet.cond_dim = 16;
  cfg.unet.groups = 4;
  cfg.latent.code_dim = 16;
  cfg.latent.width = 64;
  cfg.latent.time_dim = 32;
  return cfg;
}

inline Dataset tiny_toy(int per_class, std::uint64_t seed = 0) {
  ToySpec spec;
  spec.resolution = 8;
  spec.per_class = per_class;
  spec.seed = seed;
  spec.self_check = false;
  return generate_toy(spec);
}

}  // namespace vitdae::testing
