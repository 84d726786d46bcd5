// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Vision-transformer semantic encoder: image -> cls token -> code z.

#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/nn.hpp"
#include "vitdae/random.hpp"
#include "vitdae/tensor.hpp"

namespace vitdae {

struct ViTConfig {
  int image_size = 16;
  int channels = 3;
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int code_dim = 64;

  void validate() const;
  int tokens() const { return (image_size / patch_size) * (image_size / patch_size); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ViTConfig, image_size, channels, patch_size,
                                                embed_dim, depth, heads, mlp_ratio, code_dim)

// [C,H,W] -> [n, C*p*p] or [B,C,H,W] -> [B, n, C*p*p]. Patches are in raster
// order; within a patch the layout is (channel, row, column).
template <typename T>
Tensor<T> patchify(const Tensor<T>& images, int patch);

template <typename T>
class ViTEncoder {
 public:
  explicit ViTEncoder(ViTConfig config);

  const ViTConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Truncated-normal(0.02) weights, unit layer-norm gains, zero biases.
  void init(Rng& rng);
  // images [B,C,H,W] -> codes [B,d]. Differentiable w.r.t. parameters.
  Tensor<T> encode(const Tensor<T>& images) const;

 private:
  struct Block {
    Tensor<T> ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
    Tensor<T> ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  ViTConfig config_;
  ParameterSet<T> params_;
  Tensor<T> patch_w_, patch_b_, cls_, pos_, norm_g_, norm_b_, head_w_, head_b_;
  std::vector<Block> blocks_;
};

// Per-dimension moments of training-set codes.
struct CodeStats {
  std::vector<double> mean;
  std::vector<double> std;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CodeStats, mean, std)

// Population moments of codes [N,d]. Standard deviations are floored at
// 1e-6 so constant dimensions stay invertible.
template <typename T>
CodeStats compute_code_stats(const Tensor<T>& codes);
template <typename T>
Tensor<T> normalize_codes(const Tensor<T>& codes, const CodeStats& stats);
template <typename T>
Tensor<T> unnormalize_codes(const Tensor<T>& codes, const CodeStats& stats);

extern template class ViTEncoder<float>;
extern template class ViTEncoder<double>;

}  // namespace vitdae
