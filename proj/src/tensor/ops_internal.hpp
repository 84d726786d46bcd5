// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "vitdae/error.hpp"
#include "vitdae/tensor.hpp"

namespace vitdae::detail {

template <typename T>
inline bool parent_wants_grad(const Node<T>& n, std::size_t i) {
  return n.parents[i]->requires_grad;
}

template <typename T>
inline std::vector<T>& parent_grad(Node<T>& n, std::size_t i) {
  return n.parents[i]->grad_buffer();
}

template <typename T>
inline const std::vector<T>& parent_data(const Node<T>& n, std::size_t i) {
  return n.parents[i]->data;
}

inline void require(bool ok, const std::string& what) {
  check(ok, ErrorCode::kShape, what);
}

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, where op(A) is m x k
// and op(B) is k x n.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

}  // namespace vitdae::detail

// Explicit instantiation for both precisions of a unary/binary op family.
#define VITDAE_INSTANTIATE_UNARY(name)                     \
  template Tensor<float> name(const Tensor<float>&);       \
  template Tensor<double> name(const Tensor<double>&);
#define VITDAE_INSTANTIATE_BINARY(name)                                         \
  template Tensor<float> name(const Tensor<float>&, const Tensor<float>&);      \
  template Tensor<double> name(const Tensor<double>&, const Tensor<double>&);
