// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Conditional UNet noise predictor eps(x_t, t, z). Every residual block
// receives the time embedding and the semantic code through adaptive group
// normalization.

#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/nn.hpp"
#include "vitdae/random.hpp"
#include "vitdae/tensor.hpp"

namespace vitdae {

struct UNetConfig {
  int image_size = 16;
  int in_channels = 3;
  int base_channels = 32;
  std::vector<int> channel_mults{1, 2, 2};
  int res_blocks = 2;
  std::vector<int> attention_resolutions{4};
  int attention_heads = 4;
  int time_dim = 128;
  int cond_dim = 64;
  int groups = 8;

  void validate() const;
  int levels() const { return static_cast<int>(channel_mults.size()); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UNetConfig, image_size, in_channels,
                                                base_channels, channel_mults, res_blocks,
                                                attention_resolutions, attention_heads, time_dim,
                                                cond_dim, groups)

// Per-block projections of the time embedding and the code onto a
// (scale, shift) pair per channel.
template <typename T>
struct ConditionHead {
  Tensor<T> time_w, time_b;  // [time_dim, 2C], [2C]
  Tensor<T> cond_w, cond_b;  // [cond_dim, 2C], [2C]
};

// group_norm(features) * (1 + s_t + s_z) + (b_t + b_z), where (s_t, b_t) and
// (s_z, b_z) are linear in the activated time embedding and the code.
template <typename T>
Tensor<T> inject_condition(const Tensor<T>& features, const Tensor<T>& t_emb, const Tensor<T>& z,
                           const ConditionHead<T>& head, std::size_t groups);

template <typename T>
class UNet {
 public:
  explicit UNet(UNetConfig config);

  const UNetConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit norm gains; the
  // last conv of every residual branch and the output conv start at zero.
  void init(Rng& rng);

  // x [B,C,H,W], one timestep per sample, z [B,d] or undefined for the
  // learned null code. H = W must be divisible by 2^(levels-1).
  Tensor<T> predict_noise(const Tensor<T>& x, const std::vector<int>& steps,
                          const Tensor<T>& z) const;

 private:
  struct ResBlock {
    std::size_t in_ch = 0, out_ch = 0;
    Tensor<T> gn1_g, gn1_b, conv1_w, conv1_b, conv2_w, conv2_b, skip_w, skip_b;
    ConditionHead<T> cond;
  };
  struct AttnBlock {
    std::size_t ch = 0;
    Tensor<T> gn_g, gn_b, qkv_w, qkv_b, proj_w, proj_b;
  };
  struct Level {
    std::vector<ResBlock> down;
    std::vector<AttnBlock> down_attn;  // empty when the level has no attention
    Tensor<T> down_w, down_b;          // undefined on the last level
    std::vector<ResBlock> up;
    std::vector<AttnBlock> up_attn;
    Tensor<T> up_w, up_b;  // undefined on the first level
  };

  ResBlock make_res(const std::string& name, std::size_t in_ch, std::size_t out_ch);
  AttnBlock make_attn(const std::string& name, std::size_t ch);
  Tensor<T> run_res(const ResBlock& blk, const Tensor<T>& x, const Tensor<T>& t_emb,
                    const Tensor<T>& z) const;
  Tensor<T> run_attn(const AttnBlock& blk, const Tensor<T>& x) const;

  UNetConfig config_;
  ParameterSet<T> params_;
  std::vector<Level> levels_;
  std::vector<bool> level_attention_;
  Tensor<T> in_w_, in_b_, temb1_w_, temb1_b_, temb2_w_, temb2_b_, null_code_;
  ResBlock mid1_, mid2_;
  AttnBlock mid_attn_;
  Tensor<T> out_g_, out_b_, out_w_, out_bias_;
  std::vector<std::string> zero_init_;
};

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace vitdae
