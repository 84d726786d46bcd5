// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "ops_internal.hpp"

namespace vitdae {

using detail::Node;
using detail::parent_data;
using detail::parent_grad;
using detail::parent_wants_grad;

namespace {

enum class Broadcast { kEqual, kScalarB, kScalarA };

template <typename T>
Broadcast classify(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kEqual;
  if (b.numel() == 1) return Broadcast::kScalarB;
  if (a.numel() == 1) return Broadcast::kScalarA;
  fail(ErrorCode::kShape, std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()) +
                              " (only equal shapes or scalar operands broadcast)");
}

// f(x, y) forward; dfx / dfy give the local partials at (x, y).
template <typename T, typename F, typename Dx, typename Dy>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* op, F f, Dx dfx,
                 Dy dfy) {
  const Broadcast mode = classify(a, b, op);
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  auto ad = a.data();
  auto bd = b.data();
  const std::size_t sa = mode == Broadcast::kScalarA ? 0 : 1;
  const std::size_t sb = mode == Broadcast::kScalarB ? 0 : 1;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i * sa], bd[i * sb]);
  return detail::make_result<T>(shape, std::move(out), {a, b}, [=](Node<T>& self) {
    const auto& x = parent_data(self, 0);
    const auto& y = parent_data(self, 1);
    const auto& g = self.grad;
    if (parent_wants_grad(self, 0)) {
      auto& gx = parent_grad(self, 0);
      for (std::size_t i = 0; i < n; ++i) gx[i * sa] += g[i] * dfx(x[i * sa], y[i * sb]);
    }
    if (parent_wants_grad(self, 1)) {
      auto& gy = parent_grad(self, 1);
      for (std::size_t i = 0; i < n; ++i) gy[i * sb] += g[i] * dfy(x[i * sa], y[i * sb]);
    }
  });
}

// f(x) forward; df(x, fx) gives the derivative from input and output.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D df) {
  const std::size_t n = a.numel();
  auto ad = a.data();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i]);
  return detail::make_result<T>(a.shape(), std::move(out), {a}, [=](Node<T>& self) {
    const auto& x = parent_data(self, 0);
    const auto& y = self.data;
    const auto& g = self.grad;
    auto& gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(a, [value](T x) { return x + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return x * sigmoid(x); },
      [](T x, T) {
        const T s = sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  const T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary(
      a, [=](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [=](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  for (T v : a.data())
    check(v >= T(0), ErrorCode::kInvalidArgument, "sqrt of negative value");
  return unary(a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

VITDAE_INSTANTIATE_BINARY(add)
VITDAE_INSTANTIATE_BINARY(sub)
VITDAE_INSTANTIATE_BINARY(mul)
VITDAE_INSTANTIATE_UNARY(neg)
VITDAE_INSTANTIATE_UNARY(silu)
VITDAE_INSTANTIATE_UNARY(gelu)
VITDAE_INSTANTIATE_UNARY(sqrt)
VITDAE_INSTANTIATE_UNARY(exp)
VITDAE_INSTANTIATE_UNARY(square)
VITDAE_INSTANTIATE_UNARY(abs)
template Tensor<float> scale(const Tensor<float>&, float);
template Tensor<double> scale(const Tensor<double>&, double);
template Tensor<float> add_scalar(const Tensor<float>&, float);
template Tensor<double> add_scalar(const Tensor<double>&, double);

}  // namespace vitdae
