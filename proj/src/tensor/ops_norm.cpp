// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "ops_internal.hpp"

namespace vitdae {

using detail::Node;
using detail::parent_grad;
using detail::parent_wants_grad;
using detail::require;

namespace {

// Normalizes `slices` contiguous runs. Each run spans `channels_per_slice`
// channels of `inner` elements; channel c of run s maps to affine index
// (s % slices_per_sample) * channels_per_slice + c. For layer norm,
// channels_per_slice == D and inner == 1.
template <typename T>
Tensor<T> normalize(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                    std::size_t slices, std::size_t slices_per_sample,
                    std::size_t channels_per_slice, std::size_t inner, std::size_t affine_size) {
  check(eps > T(0), ErrorCode::kInvalidArgument, "normalization: eps must be positive");
  if (gain.defined())
    require(gain.shape() == Shape{affine_size},
            "normalization: gain must be [" + std::to_string(affine_size) + "], got " +
                shape_str(gain.shape()));
  if (bias.defined())
    require(bias.shape() == Shape{affine_size},
            "normalization: bias must be [" + std::to_string(affine_size) + "], got " +
                shape_str(bias.shape()));
  const std::size_t len = channels_per_slice * inner;
  auto xd = x.data();
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const T* src = &xd[s * len];
    T mu = 0;
    for (std::size_t i = 0; i < len; ++i) mu += src[i];
    mu /= static_cast<T>(len);
    T var = 0;
    for (std::size_t i = 0; i < len; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<T>(len);
    rstd[s] = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < len; ++i) xhat[s * len + i] = (src[i] - mu) * rstd[s];
  }
  auto affine_index = [=](std::size_t s, std::size_t c) {
    return (s % slices_per_sample) * channels_per_slice + c;
  };
  std::vector<T> out = xhat;
  if (gain.defined() || bias.defined()) {
    for (std::size_t s = 0; s < slices; ++s)
      for (std::size_t c = 0; c < channels_per_slice; ++c) {
        const std::size_t a = affine_index(s, c);
        const T gv = gain.defined() ? gain.data()[a] : T(1);
        const T bv = bias.defined() ? bias.data()[a] : T(0);
        for (std::size_t i = 0; i < inner; ++i) {
          T& v = out[s * len + c * inner + i];
          v = v * gv + bv;
        }
      }
  }

  std::vector<Tensor<T>> parents{x};
  const std::size_t gain_slot = gain.defined() ? parents.size() : 0;
  if (gain.defined()) parents.push_back(gain);
  const std::size_t bias_slot = bias.defined() ? parents.size() : 0;
  if (bias.defined()) parents.push_back(bias);

  return detail::make_result<T>(
      x.shape(), std::move(out), parents,
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        const auto& g = self.grad;
        const T* gain_data = gain_slot ? self.parents[gain_slot]->data.data() : nullptr;
        if (gain_slot && parent_wants_grad(self, gain_slot)) {
          auto& gg = parent_grad(self, gain_slot);
          for (std::size_t s = 0; s < slices; ++s)
            for (std::size_t c = 0; c < channels_per_slice; ++c) {
              T acc = 0;
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = s * len + c * inner + i;
                acc += g[k] * xhat[k];
              }
              gg[affine_index(s, c)] += acc;
            }
        }
        if (bias_slot && parent_wants_grad(self, bias_slot)) {
          auto& gb = parent_grad(self, bias_slot);
          for (std::size_t s = 0; s < slices; ++s)
            for (std::size_t c = 0; c < channels_per_slice; ++c) {
              T acc = 0;
              for (std::size_t i = 0; i < inner; ++i) acc += g[s * len + c * inner + i];
              gb[affine_index(s, c)] += acc;
            }
        }
        if (!parent_wants_grad(self, 0)) return;
        auto& gx = parent_grad(self, 0);
        std::vector<T> dy(len);
        for (std::size_t s = 0; s < slices; ++s) {
          T mean_dy = 0, mean_dy_xhat = 0;
          for (std::size_t c = 0; c < channels_per_slice; ++c) {
            const T gv = gain_data ? gain_data[affine_index(s, c)] : T(1);
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t local = c * inner + i;
              dy[local] = g[s * len + local] * gv;
              mean_dy += dy[local];
              mean_dy_xhat += dy[local] * xhat[s * len + local];
            }
          }
          mean_dy /= static_cast<T>(len);
          mean_dy_xhat /= static_cast<T>(len);
          for (std::size_t i = 0; i < len; ++i)
            gx[s * len + i] += rstd[s] * (dy[i] - mean_dy - xhat[s * len + i] * mean_dy_xhat);
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require(x.rank() >= 1, "layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  return normalize(x, gain, bias, eps, x.numel() / d, 1, d, 1, d);
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps) {
  require(x.rank() >= 2, "group_norm: input must be [B,C,...], got " + shape_str(x.shape()));
  const std::size_t channels = x.dim(1);
  require(groups > 0 && channels % groups == 0,
          "group_norm: " + std::to_string(groups) + " groups do not divide " +
              std::to_string(channels) + " channels");
  const std::size_t inner = x.numel() / (x.dim(0) * channels);
  return normalize(x, gain, bias, eps, x.dim(0) * groups, groups, channels / groups, inner,
                   channels);
}

template Tensor<float> layer_norm(const Tensor<float>&, const Tensor<float>&,
                                  const Tensor<float>&, float);
template Tensor<double> layer_norm(const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, double);
template Tensor<float> group_norm(const Tensor<float>&, std::size_t, const Tensor<float>&,
                                  const Tensor<float>&, float);
template Tensor<double> group_norm(const Tensor<double>&, std::size_t, const Tensor<double>&,
                                   const Tensor<double>&, double);

}  // namespace vitdae
