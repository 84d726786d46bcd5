// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "vitdae/error.hpp"

namespace vitdae {

void ViTConfig::validate() const {
  check(image_size > 0 && channels > 0 && patch_size > 0, ErrorCode::kConfig,
        "encoder: sizes must be positive");
  check(image_size % patch_size == 0, ErrorCode::kConfig,
        "encoder: patch_size " + std::to_string(patch_size) + " does not divide image_size " +
            std::to_string(image_size));
  check(embed_dim > 0 && heads > 0 && embed_dim % heads == 0, ErrorCode::kConfig,
        "encoder: embed_dim must be divisible by heads");
  check(depth >= 0 && mlp_ratio > 0 && code_dim > 0, ErrorCode::kConfig,
        "encoder: depth, mlp_ratio and code_dim must be positive");
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& images, int patch) {
  const bool batched = images.rank() == 4;
  check(batched || images.rank() == 3, ErrorCode::kShape,
        "patchify: expected [C,H,W] or [B,C,H,W], got " + shape_str(images.shape()));
  const std::size_t off = batched ? 1 : 0;
  const std::size_t b = batched ? images.dim(0) : 1;
  const std::size_t c = images.dim(off), h = images.dim(off + 1), w = images.dim(off + 2);
  const auto p = static_cast<std::size_t>(patch);
  check(patch > 0 && h % p == 0 && w % p == 0, ErrorCode::kShape,
        "patchify: patch " + std::to_string(patch) + " does not divide " +
            shape_str(images.shape()));
  auto x = reshape(images, {b, c, h / p, p, w / p, p});
  x = permute(x, {0, 2, 4, 1, 3, 5});
  const std::size_t n = (h / p) * (w / p);
  if (batched) return reshape(x, {b, n, c * p * p});
  return reshape(x, {n, c * p * p});
}

template <typename T>
ViTEncoder<T>::ViTEncoder(ViTConfig config) : config_(config) {
  config_.validate();
  const auto e = static_cast<std::size_t>(config_.embed_dim);
  const auto p = static_cast<std::size_t>(config_.patch_size);
  const auto patch_dim = static_cast<std::size_t>(config_.channels) * p * p;
  const auto hidden = e * static_cast<std::size_t>(config_.mlp_ratio);
  patch_w_ = params_.add("patch.w", {patch_dim, e});
  patch_b_ = params_.add("patch.b", {e});
  cls_ = params_.add("cls", {e});
  pos_ = params_.add("pos", {static_cast<std::size_t>(config_.tokens()) + 1, e});
  for (int i = 0; i < config_.depth; ++i) {
    const std::string pre = "block" + std::to_string(i) + ".";
    Block b;
    b.ln1_g = params_.add(pre + "ln1.g", {e});
    b.ln1_b = params_.add(pre + "ln1.b", {e});
    b.qkv_w = params_.add(pre + "qkv.w", {e, 3 * e});
    b.qkv_b = params_.add(pre + "qkv.b", {3 * e});
    b.proj_w = params_.add(pre + "proj.w", {e, e});
    b.proj_b = params_.add(pre + "proj.b", {e});
    b.ln2_g = params_.add(pre + "ln2.g", {e});
    b.ln2_b = params_.add(pre + "ln2.b", {e});
    b.fc1_w = params_.add(pre + "fc1.w", {e, hidden});
    b.fc1_b = params_.add(pre + "fc1.b", {hidden});
    b.fc2_w = params_.add(pre + "fc2.w", {hidden, e});
    b.fc2_b = params_.add(pre + "fc2.b", {e});
    blocks_.push_back(b);
  }
  norm_g_ = params_.add("norm.g", {e});
  norm_b_ = params_.add("norm.b", {e});
  head_w_ = params_.add("head.w", {e, static_cast<std::size_t>(config_.code_dim)});
  head_b_ = params_.add("head.b", {static_cast<std::size_t>(config_.code_dim)});
}

namespace {

template <typename T>
void trunc_normal(const Tensor<T>& t, double stddev, Rng& rng) {
  for (auto& v : t.data()) {
    double x;
    do x = rng.normal();
    while (std::abs(x) > 2.0);
    v = static_cast<T>(stddev * x);
  }
}

template <typename T>
void fill(const Tensor<T>& t, T value) {
  std::fill(t.data().begin(), t.data().end(), value);
}

}  // namespace

template <typename T>
void ViTEncoder<T>::init(Rng& rng) {
  for (const auto& [name, t] : params_.entries()) {
    const bool is_gain = name.ends_with(".g");
    const bool is_bias = name.ends_with(".b");
    if (is_gain) fill(t, T(1));
    else if (is_bias) fill(t, T(0));
    else trunc_normal(t, 0.02, rng);
  }
}

template <typename T>
Tensor<T> ViTEncoder<T>::encode(const Tensor<T>& images) const {
  const auto& c = config_;
  check(images.rank() == 4 && images.dim(1) == static_cast<std::size_t>(c.channels) &&
            images.dim(2) == static_cast<std::size_t>(c.image_size) &&
            images.dim(3) == static_cast<std::size_t>(c.image_size),
        ErrorCode::kShape,
        "encoder: expected [B," + std::to_string(c.channels) + "," +
            std::to_string(c.image_size) + "," + std::to_string(c.image_size) + "], got " +
            shape_str(images.shape()));
  const std::size_t b = images.dim(0);
  const auto e = static_cast<std::size_t>(c.embed_dim);
  const auto heads = static_cast<std::size_t>(c.heads);
  const std::size_t n = static_cast<std::size_t>(c.tokens()) + 1;
  const T eps = static_cast<T>(1e-6);

  auto tokens = linear(patchify(images, c.patch_size), patch_w_, patch_b_);
  auto cls = repeat_leading(reshape(cls_, {1, e}), b);
  auto x = add_trailing(concat<T>({cls, tokens}, 1), pos_);
  for (const auto& blk : blocks_) {
    auto h = layer_norm(x, blk.ln1_g, blk.ln1_b, eps);
    auto qkv = permute(reshape(linear(h, blk.qkv_w, blk.qkv_b), {b, n, 3, heads, e / heads}),
                       {2, 0, 3, 1, 4});
    const Shape head_shape{b, heads, n, e / heads};
    auto attn = softmax_attention(reshape(slice(qkv, 0, 0, 1), head_shape),
                                  reshape(slice(qkv, 0, 1, 1), head_shape),
                                  reshape(slice(qkv, 0, 2, 1), head_shape));
    attn = reshape(permute(attn, {0, 2, 1, 3}), {b, n, e});
    x = add(x, linear(attn, blk.proj_w, blk.proj_b));
    h = layer_norm(x, blk.ln2_g, blk.ln2_b, eps);
    x = add(x, linear(gelu(linear(h, blk.fc1_w, blk.fc1_b)), blk.fc2_w, blk.fc2_b));
  }
  x = layer_norm(x, norm_g_, norm_b_, eps);
  auto cls_out = reshape(slice(x, 1, 0, 1), {b, e});
  return linear(cls_out, head_w_, head_b_);
}

template <typename T>
CodeStats compute_code_stats(const Tensor<T>& codes) {
  check(codes.rank() == 2 && codes.dim(0) > 0, ErrorCode::kShape,
        "code stats: expected non-empty [N,d], got " + shape_str(codes.shape()));
  const std::size_t n = codes.dim(0), d = codes.dim(1);
  CodeStats s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += static_cast<double>(codes[i * d + j]);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double r = static_cast<double>(codes[i * d + j]) - s.mean[j];
      s.std[j] += r * r;
    }
  for (auto& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-6);
  return s;
}

namespace {

template <typename T>
Tensor<T> affine_codes(const Tensor<T>& codes, const CodeStats& stats, bool forward) {
  const std::size_t d = stats.mean.size();
  check(stats.std.size() == d, ErrorCode::kInvalidArgument, "code stats: mean/std size differ");
  check(codes.rank() >= 1 && codes.shape().back() == d, ErrorCode::kShape,
        "code stats are " + std::to_string(d) + "-dimensional, codes are " +
            shape_str(codes.shape()));
  for (double s : stats.std)
    check(s > 0 && std::isfinite(s), ErrorCode::kInvalidArgument,
          "code stats: standard deviations must be positive");
  Tensor<T> out(codes.shape());
  auto src = codes.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t j = i % d;
    const double v = static_cast<double>(src[i]);
    dst[i] = static_cast<T>(forward ? (v - stats.mean[j]) / stats.std[j]
                                    : v * stats.std[j] + stats.mean[j]);
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> normalize_codes(const Tensor<T>& codes, const CodeStats& stats) {
  return affine_codes(codes, stats, true);
}

template <typename T>
Tensor<T> unnormalize_codes(const Tensor<T>& codes, const CodeStats& stats) {
  return affine_codes(codes, stats, false);
}

template Tensor<float> patchify(const Tensor<float>&, int);
template Tensor<double> patchify(const Tensor<double>&, int);
template class ViTEncoder<float>;
template class ViTEncoder<double>;
template CodeStats compute_code_stats(const Tensor<float>&);
template CodeStats compute_code_stats(const Tensor<double>&);
template Tensor<float> normalize_codes(const Tensor<float>&, const CodeStats&);
template Tensor<double> normalize_codes(const Tensor<double>&, const CodeStats&);
template Tensor<float> unnormalize_codes(const Tensor<float>&, const CodeStats&);
template Tensor<double> unnormalize_codes(const Tensor<double>&, const CodeStats&);

}  // namespace vitdae
