// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/unet.hpp"

#include <algorithm>
#include <cmath>

#include "vitdae/error.hpp"

namespace vitdae {

namespace {

constexpr double kNormEps = 1e-5;

std::size_t to_size(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void UNetConfig::validate() const {
  check(image_size > 0 && in_channels > 0 && base_channels > 0 && res_blocks > 0,
        ErrorCode::kConfig, "unet: sizes must be positive");
  check(!channel_mults.empty(), ErrorCode::kConfig, "unet: need at least one level");
  check(image_size % (1 << (levels() - 1)) == 0, ErrorCode::kConfig,
        "unet: image_size " + std::to_string(image_size) + " not divisible by 2^(levels-1)");
  check(time_dim > 0 && time_dim % 2 == 0 && cond_dim > 0, ErrorCode::kConfig,
        "unet: time_dim must be even and cond_dim positive");
  check(base_channels % 2 == 0, ErrorCode::kConfig, "unet: base_channels must be even");
  for (int m : channel_mults) {
    check(m > 0, ErrorCode::kConfig, "unet: channel multipliers must be positive");
    const int ch = m * base_channels;
    check(groups > 0 && ch % groups == 0, ErrorCode::kConfig,
          "unet: groups " + std::to_string(groups) + " do not divide " + std::to_string(ch) +
              " channels");
    check(attention_heads > 0 && ch % attention_heads == 0, ErrorCode::kConfig,
          "unet: attention heads do not divide " + std::to_string(ch) + " channels");
  }
}

template <typename T>
Tensor<T> inject_condition(const Tensor<T>& features, const Tensor<T>& t_emb, const Tensor<T>& z,
                           const ConditionHead<T>& head, std::size_t groups) {
  check(features.rank() >= 2, ErrorCode::kShape, "inject_condition: features need [B,C,...]");
  const std::size_t b = features.dim(0), c = features.dim(1);
  check(head.time_w.rank() == 2 && head.time_w.dim(1) == 2 * c && head.cond_w.rank() == 2 &&
            head.cond_w.dim(1) == 2 * c,
        ErrorCode::kShape,
        "inject_condition: heads produce " + shape_str(head.time_w.shape()) + " / " +
            shape_str(head.cond_w.shape()) + " for " + std::to_string(c) + " channels");
  check(t_emb.rank() == 2 && t_emb.dim(0) == b && t_emb.dim(1) == head.time_w.dim(0),
        ErrorCode::kShape, "inject_condition: time embedding is " + shape_str(t_emb.shape()));
  check(z.rank() == 2 && z.dim(0) == b && z.dim(1) == head.cond_w.dim(0), ErrorCode::kShape,
        "inject_condition: code is " + shape_str(z.shape()) + ", expected [" +
            std::to_string(b) + "," + std::to_string(head.cond_w.dim(0)) + "]");
  auto normed = group_norm(features, groups, Tensor<T>(), Tensor<T>(), static_cast<T>(kNormEps));
  auto ts = linear(t_emb, head.time_w, head.time_b);
  auto zs = linear(z, head.cond_w, head.cond_b);
  auto scale = add_scalar(add(slice(ts, 1, 0, c), slice(zs, 1, 0, c)), T(1));
  auto shift = add(slice(ts, 1, c, c), slice(zs, 1, c, c));
  return channel_affine(normed, scale, shift);
}

template <typename T>
typename UNet<T>::ResBlock UNet<T>::make_res(const std::string& name, std::size_t in_ch,
                                             std::size_t out_ch) {
  ResBlock r;
  r.in_ch = in_ch;
  r.out_ch = out_ch;
  r.gn1_g = params_.add(name + ".gn1.g", {in_ch});
  r.gn1_b = params_.add(name + ".gn1.b", {in_ch});
  r.conv1_w = params_.add(name + ".conv1.w", {out_ch, in_ch, 3, 3});
  r.conv1_b = params_.add(name + ".conv1.b", {out_ch});
  r.cond.time_w = params_.add(name + ".time.w", {to_size(config_.time_dim), 2 * out_ch});
  r.cond.time_b = params_.add(name + ".time.b", {2 * out_ch});
  r.cond.cond_w = params_.add(name + ".cond.w", {to_size(config_.cond_dim), 2 * out_ch});
  r.cond.cond_b = params_.add(name + ".cond.b", {2 * out_ch});
  r.conv2_w = params_.add(name + ".conv2.w", {out_ch, out_ch, 3, 3});
  r.conv2_b = params_.add(name + ".conv2.b", {out_ch});
  zero_init_.push_back(name + ".conv2.w");
  if (in_ch != out_ch) {
    r.skip_w = params_.add(name + ".skip.w", {out_ch, in_ch, 1, 1});
    r.skip_b = params_.add(name + ".skip.b", {out_ch});
  }
  return r;
}

template <typename T>
typename UNet<T>::AttnBlock UNet<T>::make_attn(const std::string& name, std::size_t ch) {
  AttnBlock a;
  a.ch = ch;
  a.gn_g = params_.add(name + ".gn.g", {ch});
  a.gn_b = params_.add(name + ".gn.b", {ch});
  a.qkv_w = params_.add(name + ".qkv.w", {ch, 3 * ch});
  a.qkv_b = params_.add(name + ".qkv.b", {3 * ch});
  a.proj_w = params_.add(name + ".proj.w", {ch, ch});
  a.proj_b = params_.add(name + ".proj.b", {ch});
  zero_init_.push_back(name + ".proj.w");
  return a;
}

template <typename T>
UNet<T>::UNet(UNetConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t base = to_size(config_.base_channels);
  const std::size_t tdim = to_size(config_.time_dim);
  in_w_ = params_.add("in.w", {base, to_size(config_.in_channels), 3, 3});
  in_b_ = params_.add("in.b", {base});
  temb1_w_ = params_.add("temb1.w", {base, tdim});
  temb1_b_ = params_.add("temb1.b", {tdim});
  temb2_w_ = params_.add("temb2.w", {tdim, tdim});
  temb2_b_ = params_.add("temb2.b", {tdim});
  null_code_ = params_.add("null_code", {to_size(config_.cond_dim)});

  // Attention levels are fixed from the configured image size, so other
  // input sizes keep the same topology.
  const int n_levels = config_.levels();
  for (int i = 0; i < n_levels; ++i) {
    const int res = config_.image_size >> i;
    level_attention_.push_back(std::find(config_.attention_resolutions.begin(),
                                         config_.attention_resolutions.end(),
                                         res) != config_.attention_resolutions.end());
  }
  levels_.resize(n_levels);
  std::vector<std::size_t> skip_ch{base};
  std::size_t ch = base;
  for (int i = 0; i < n_levels; ++i) {
    const std::size_t out = base * to_size(config_.channel_mults[i]);
    const std::string pre = "down" + std::to_string(i) + ".";
    for (int r = 0; r < config_.res_blocks; ++r) {
      levels_[i].down.push_back(make_res(pre + "res" + std::to_string(r), ch, out));
      ch = out;
      if (level_attention_[i])
        levels_[i].down_attn.push_back(make_attn(pre + "attn" + std::to_string(r), ch));
      skip_ch.push_back(ch);
    }
    if (i + 1 < n_levels) {
      levels_[i].down_w = params_.add(pre + "downsample.w", {ch, ch, 4, 4});
      levels_[i].down_b = params_.add(pre + "downsample.b", {ch});
      skip_ch.push_back(ch);
    }
  }
  mid1_ = make_res("mid.res0", ch, ch);
  mid_attn_ = make_attn("mid.attn", ch);
  mid2_ = make_res("mid.res1", ch, ch);
  for (int i = n_levels - 1; i >= 0; --i) {
    const std::size_t out = base * to_size(config_.channel_mults[i]);
    const std::string pre = "up" + std::to_string(i) + ".";
    for (int r = 0; r <= config_.res_blocks; ++r) {
      const std::size_t skip = skip_ch.back();
      skip_ch.pop_back();
      levels_[i].up.push_back(make_res(pre + "res" + std::to_string(r), ch + skip, out));
      ch = out;
      if (level_attention_[i])
        levels_[i].up_attn.push_back(make_attn(pre + "attn" + std::to_string(r), ch));
    }
    if (i > 0) {
      levels_[i].up_w = params_.add(pre + "upsample.w", {ch, ch, 3, 3});
      levels_[i].up_b = params_.add(pre + "upsample.b", {ch});
    }
  }
  out_g_ = params_.add("out.gn.g", {ch});
  out_b_ = params_.add("out.gn.b", {ch});
  out_w_ = params_.add("out.conv.w", {to_size(config_.in_channels), ch, 3, 3});
  out_bias_ = params_.add("out.conv.b", {to_size(config_.in_channels)});
  zero_init_.push_back("out.conv.w");
}

template <typename T>
void UNet<T>::init(Rng& rng) {
  for (const auto& [name, t] : params_.entries()) {
    auto d = t.data();
    if (name.ends_with(".g")) {
      std::fill(d.begin(), d.end(), T(1));
    } else if (name.ends_with(".b") || name == "null_code" ||
               std::find(zero_init_.begin(), zero_init_.end(), name) != zero_init_.end()) {
      std::fill(d.begin(), d.end(), T(0));
    } else {
      // Linear weights are [in, out]; conv weights are [out, in, kh, kw].
      const auto& s = t.shape();
      const std::size_t fan_in = s.size() == 4 ? s[1] * s[2] * s[3] : s[0];
      init_uniform(t, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    }
  }
}

template <typename T>
Tensor<T> UNet<T>::run_res(const ResBlock& blk, const Tensor<T>& x, const Tensor<T>& t_emb,
                           const Tensor<T>& z) const {
  const auto groups = to_size(config_.groups);
  auto h = silu(group_norm(x, groups, blk.gn1_g, blk.gn1_b, static_cast<T>(kNormEps)));
  h = conv2d(h, blk.conv1_w, blk.conv1_b, 1, 1);
  h = silu(inject_condition(h, t_emb, z, blk.cond, groups));
  h = conv2d(h, blk.conv2_w, blk.conv2_b, 1, 1);
  auto skip = blk.skip_w.defined() ? conv2d(x, blk.skip_w, blk.skip_b, 1, 0) : x;
  return add(skip, h);
}

template <typename T>
Tensor<T> UNet<T>::run_attn(const AttnBlock& blk, const Tensor<T>& x) const {
  const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto heads = to_size(config_.attention_heads);
  auto h = group_norm(x, to_size(config_.groups), blk.gn_g, blk.gn_b, static_cast<T>(kNormEps));
  auto tokens = permute(reshape(h, {b, c, hw}), {0, 2, 1});
  auto qkv = permute(reshape(linear(tokens, blk.qkv_w, blk.qkv_b), {b, hw, 3, heads, c / heads}),
                     {2, 0, 3, 1, 4});
  const Shape head_shape{b, heads, hw, c / heads};
  auto attn = softmax_attention(reshape(slice(qkv, 0, 0, 1), head_shape),
                                reshape(slice(qkv, 0, 1, 1), head_shape),
                                reshape(slice(qkv, 0, 2, 1), head_shape));
  attn = linear(reshape(permute(attn, {0, 2, 1, 3}), {b, hw, c}), blk.proj_w, blk.proj_b);
  return add(x, reshape(permute(attn, {0, 2, 1}), x.shape()));
}

template <typename T>
Tensor<T> UNet<T>::predict_noise(const Tensor<T>& x, const std::vector<int>& steps,
                                 const Tensor<T>& z) const {
  const int n_levels = config_.levels();
  check(x.rank() == 4 && x.dim(1) == to_size(config_.in_channels), ErrorCode::kShape,
        "unet: expected [B," + std::to_string(config_.in_channels) + ",H,W], got " +
            shape_str(x.shape()));
  const std::size_t b = x.dim(0), hgt = x.dim(2);
  const std::size_t factor = std::size_t{1} << (n_levels - 1);
  check(hgt == x.dim(3) && hgt % factor == 0 && hgt > 0, ErrorCode::kShape,
        "unet: resolution " + shape_str(x.shape()) + " must be square and divisible by " +
            std::to_string(factor));
  check(steps.size() == b, ErrorCode::kShape,
        "unet: " + std::to_string(steps.size()) + " timesteps for batch of " + std::to_string(b));
  Tensor<T> code = z;
  if (!code.defined()) {
    code = repeat_leading(null_code_, b);
  } else {
    check(code.rank() == 2 && code.dim(0) == b && code.dim(1) == to_size(config_.cond_dim),
          ErrorCode::kShape,
          "unet: code is " + shape_str(code.shape()) + ", expected [" + std::to_string(b) + "," +
              std::to_string(config_.cond_dim) + "]");
  }
  auto temb = timestep_embedding<T>(steps, to_size(config_.base_channels));
  temb = linear(silu(linear(temb, temb1_w_, temb1_b_)), temb2_w_, temb2_b_);
  const auto t_act = silu(temb);

  std::vector<Tensor<T>> skips;
  auto h = conv2d(x, in_w_, in_b_, 1, 1);
  skips.push_back(h);
  for (int i = 0; i < n_levels; ++i) {
    const auto& lv = levels_[i];
    for (std::size_t r = 0; r < lv.down.size(); ++r) {
      h = run_res(lv.down[r], h, t_act, code);
      if (!lv.down_attn.empty()) h = run_attn(lv.down_attn[r], h);
      skips.push_back(h);
    }
    if (lv.down_w.defined()) {
      h = conv2d(h, lv.down_w, lv.down_b, 2, 1);
      skips.push_back(h);
    }
  }
  h = run_res(mid1_, h, t_act, code);
  h = run_attn(mid_attn_, h);
  h = run_res(mid2_, h, t_act, code);
  for (int i = n_levels - 1; i >= 0; --i) {
    const auto& lv = levels_[i];
    for (std::size_t r = 0; r < lv.up.size(); ++r) {
      h = concat<T>({h, skips.back()}, 1);
      skips.pop_back();
      h = run_res(lv.up[r], h, t_act, code);
      if (!lv.up_attn.empty()) h = run_attn(lv.up_attn[r], h);
    }
    if (lv.up_w.defined()) h = conv2d(upsample_nearest2x(h), lv.up_w, lv.up_b, 1, 1);
  }
  h = silu(group_norm(h, to_size(config_.groups), out_g_, out_b_, static_cast<T>(kNormEps)));
  return conv2d(h, out_w_, out_bias_, 1, 1);
}

template Tensor<float> inject_condition(const Tensor<float>&, const Tensor<float>&,
                                        const Tensor<float>&, const ConditionHead<float>&,
                                        std::size_t);
template Tensor<double> inject_condition(const Tensor<double>&, const Tensor<double>&,
                                         const Tensor<double>&, const ConditionHead<double>&,
                                         std::size_t);
template class UNet<float>;
template class UNet<double>;

}  // namespace vitdae
