// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "ops_internal.hpp"

namespace vitdae {

using detail::gemm;
using detail::Node;
using detail::parent_data;
using detail::parent_grad;
using detail::parent_wants_grad;
using detail::require;

namespace {

template <typename T>
void softmax_rows(T* rows, std::size_t count, std::size_t width) {
  for (std::size_t r = 0; r < count; ++r) {
    T* row = rows + r * width;
    const T peak = *std::max_element(row, row + width);
    T z = 0;
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = std::exp(row[c] - peak);
      z += row[c];
    }
    for (std::size_t c = 0; c < width; ++c) row[c] /= z;
  }
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  require(x.rank() >= 1, "softmax: scalar input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  auto src = x.data();
  std::vector<T> out(src.begin(), src.end());
  softmax_rows(out.data(), rows, width);
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [rows, width](Node<T>& self) {
    auto& gx = parent_grad(self, 0);
    const auto& p = self.data;
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < width; ++c) dot += self.grad[r * width + c] * p[r * width + c];
      for (std::size_t c = 0; c < width; ++c)
        gx[r * width + c] += p[r * width + c] * (self.grad[r * width + c] - dot);
    }
  });
}

template <typename T>
Tensor<T> softmax_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  require(q.rank() == 4, "softmax_attention: q must be [B,h,n,dh], got " + shape_str(q.shape()));
  require(k.shape() == q.shape(), "softmax_attention: k " + shape_str(k.shape()) +
                                      " does not match q " + shape_str(q.shape()));
  require(v.shape() == q.shape(), "softmax_attention: v " + shape_str(v.shape()) +
                                      " does not match q " + shape_str(q.shape()));
  const std::size_t heads = q.dim(0) * q.dim(1);
  const std::size_t n = q.dim(2), dh = q.dim(3);
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t block = n * dh;
  std::vector<T> probs(heads * n * n);
  std::vector<T> out(q.numel());
  const T* qd = q.data().data();
  const T* kd = k.data().data();
  const T* vd = v.data().data();
  for (std::size_t h = 0; h < heads; ++h) {
    T* p = &probs[h * n * n];
    gemm<T>(false, true, n, n, dh, inv_scale, qd + h * block, kd + h * block, T(0), p);
    softmax_rows(p, n, n);
    gemm<T>(false, false, n, dh, n, T(1), p, vd + h * block, T(0), &out[h * block]);
  }
  return detail::make_result<T>(
      q.shape(), std::move(out), {q, k, v},
      [heads, n, dh, block, inv_scale, probs = std::move(probs)](Node<T>& self) {
        const T* qv = parent_data(self, 0).data();
        const T* kv = parent_data(self, 1).data();
        const T* vv = parent_data(self, 2).data();
        const bool want_q = parent_wants_grad(self, 0);
        const bool want_k = parent_wants_grad(self, 1);
        const bool want_v = parent_wants_grad(self, 2);
        std::vector<T> dp(n * n);
        for (std::size_t h = 0; h < heads; ++h) {
          const T* p = &probs[h * n * n];
          const T* g = &self.grad[h * block];
          if (want_v)
            gemm<T>(true, false, n, dh, n, T(1), p, g, T(1), &parent_grad(self, 2)[h * block]);
          if (!want_q && !want_k) continue;
          // dS = P .* (dP - rowsum(dP .* P)) with dP = dO V^T.
          gemm<T>(false, true, n, n, dh, T(1), g, vv + h * block, T(0), dp.data());
          for (std::size_t r = 0; r < n; ++r) {
            T dot = 0;
            for (std::size_t c = 0; c < n; ++c) dot += dp[r * n + c] * p[r * n + c];
            for (std::size_t c = 0; c < n; ++c) dp[r * n + c] = p[r * n + c] * (dp[r * n + c] - dot);
          }
          if (want_q)
            gemm<T>(false, false, n, dh, n, inv_scale, dp.data(), kv + h * block, T(1),
                    &parent_grad(self, 0)[h * block]);
          if (want_k)
            gemm<T>(true, false, n, dh, n, inv_scale, dp.data(), qv + h * block, T(1),
                    &parent_grad(self, 1)[h * block]);
        }
      });
}

VITDAE_INSTANTIATE_UNARY(softmax)
template Tensor<float> softmax_attention(const Tensor<float>&, const Tensor<float>&,
                                         const Tensor<float>&);
template Tensor<double> softmax_attention(const Tensor<double>&, const Tensor<double>&,
                                          const Tensor<double>&);

}  // namespace vitdae
