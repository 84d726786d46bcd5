// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "ops_internal.hpp"

namespace vitdae {

using detail::Node;
using detail::parent_data;
using detail::parent_grad;
using detail::parent_wants_grad;

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.data()) total += v;
  return detail::make_result<T>(Shape{}, {total}, {a}, [](Node<T>& self) {
    const T g = self.grad[0];
    for (auto& gx : parent_grad(self, 0)) gx += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.numel());
  T total = 0;
  for (T v : a.data()) total += v;
  return detail::make_result<T>(Shape{}, {total * inv}, {a}, [inv](Node<T>& self) {
    const T g = self.grad[0] * inv;
    for (auto& gx : parent_grad(self, 0)) gx += g;
  });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require(pred.shape() == target.shape(),
                  "l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                      shape_str(target.shape()));
  const std::size_t n = pred.numel();
  const T inv = T(1) / static_cast<T>(n);
  auto p = pred.data();
  auto q = target.data();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(p[i] - q[i]);
  return detail::make_result<T>(Shape{}, {total * inv}, {pred, target}, [=](Node<T>& self) {
    const T g = self.grad[0] * inv;
    const auto& x = parent_data(self, 0);
    const auto& y = parent_data(self, 1);
    for (std::size_t which = 0; which < 2; ++which) {
      if (!parent_wants_grad(self, which)) continue;
      auto& gx = parent_grad(self, which);
      const T sign = which == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < n; ++i) {
        const T d = x[i] - y[i];
        gx[i] += sign * g * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
      }
    }
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require(pred.shape() == target.shape(),
                  "mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                      shape_str(target.shape()));
  const std::size_t n = pred.numel();
  const T inv = T(1) / static_cast<T>(n);
  auto p = pred.data();
  auto q = target.data();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += (p[i] - q[i]) * (p[i] - q[i]);
  return detail::make_result<T>(Shape{}, {total * inv}, {pred, target}, [=](Node<T>& self) {
    const T g = self.grad[0] * inv;
    const auto& x = parent_data(self, 0);
    const auto& y = parent_data(self, 1);
    if (parent_wants_grad(self, 0)) {
      auto& gx = parent_grad(self, 0);
      for (std::size_t i = 0; i < n; ++i) gx[i] += T(2) * g * (x[i] - y[i]);
    }
    if (parent_wants_grad(self, 1)) {
      auto& gy = parent_grad(self, 1);
      for (std::size_t i = 0; i < n; ++i) gy[i] -= T(2) * g * (x[i] - y[i]);
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  detail::require(logits.rank() == 2, "cross_entropy: logits must be [N,K], got " +
                                          shape_str(logits.shape()));
  const std::size_t rows = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  detail::require(labels.size() == rows, "cross_entropy: " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(rows) + " rows");
  std::vector<int> targets(labels.begin(), labels.end());
  for (int y : targets)
    check(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorCode::kInvalidArgument,
          "cross_entropy: label " + std::to_string(y) + " out of range");
  auto x = logits.data();
  std::vector<T> probs(rows * classes);
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = &x[r * classes];
    const T peak = *std::max_element(row, row + classes);
    T z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - peak);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - peak) / z;
    total += -(row[targets[r]] - peak - std::log(z));
  }
  const T inv = T(1) / static_cast<T>(rows);
  return detail::make_result<T>(
      Shape{}, {total * inv}, {logits},
      [probs = std::move(probs), targets = std::move(targets), rows, classes,
       inv](Node<T>& self) {
        const T g = self.grad[0] * inv;
        auto& gx = parent_grad(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const T onehot = static_cast<std::size_t>(targets[r]) == c ? T(1) : T(0);
            gx[r * classes + c] += g * (probs[r * classes + c] - onehot);
          }
        }
      });
}

VITDAE_INSTANTIATE_UNARY(sum)
VITDAE_INSTANTIATE_UNARY(mean)
VITDAE_INSTANTIATE_BINARY(l1_loss)
VITDAE_INSTANTIATE_BINARY(mse_loss)
template Tensor<float> cross_entropy(const Tensor<float>&, std::span<const int>);
template Tensor<double> cross_entropy(const Tensor<double>&, std::span<const int>);

}  // namespace vitdae
