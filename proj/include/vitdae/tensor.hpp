// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared node. Ops record their parents and
// a backward closure only when grad mode is on and at least one input requires
// a gradient; backward() replays the recorded graph in reverse topological
// order and then drops it. Instantiated for float (training) and double
// (gradient checks).

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vitdae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Thread-local switch; when off, ops never record a graph.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
  static Tensor from_node(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  // Tensors are handles: data() is mutable through const handles on purpose,
  // so parameter tensors can be updated by optimizers and loaders in place.
  std::span<T> data() const;
  T& operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  // Allocates a zero gradient on first access.
  std::span<T> grad() const;
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  // Seeds d(this)/d(this) = 1 and accumulates into every requires_grad
  // ancestor. The tape is released afterwards.
  void backward() const;

  // Deep copy of the values, detached from any graph.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

// Converts between precisions (detached).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  auto src = x.data();
  std::vector<To> out(src.begin(), src.end());
  return Tensor<To>(x.shape(), std::move(out));
}

namespace detail {

// Builds an op result. The graph is recorded only if grad mode is enabled and
// some parent requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::initializer_list<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward);

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& parents,
                      std::function<void(Node<T>&)> backward);

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise. Binary ops accept equal shapes, or one operand with a single
// element broadcast against the other.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> silu(const Tensor<T>& a);
template <typename T> Tensor<T> gelu(const Tensor<T>& a);  // erf form
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);

// ---------------------------------------------------------------------------
// Reductions and losses. All return rank-0 tensors.

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);
template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);
// Mean softmax cross-entropy of logits [N, K] against integer labels.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Shape manipulation (always copies).

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& order);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start,
                std::size_t length);
// Stacks `count` copies of `a` along a new leading axis.
template <typename T> Tensor<T> repeat_leading(const Tensor<T>& a, std::size_t count);
// a + b where b's shape equals the trailing dims of a (bias / position add).
template <typename T> Tensor<T> add_trailing(const Tensor<T>& a, const Tensor<T>& b);
// x[B,C,...] * scale[B,C] + shift[B,C].
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale,
                         const Tensor<T>& shift);
template <typename T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Linear algebra.

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// x[..., in] * w[in, out] (+ bias[out]).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {});
// x[B,C,H,W] (*) w[F,C,kh,kw] (+ bias[F]); zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad);

// ---------------------------------------------------------------------------
// Normalization. gain / bias may be undefined (no affine).

// Normalizes over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps);
// x[B,C,...]; groups must divide C. gain / bias are per channel.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups,
                     const Tensor<T>& gain, const Tensor<T>& bias, T eps);

// ---------------------------------------------------------------------------
// Attention.

// Softmax over the last axis.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);
// softmax(q k^T / sqrt(dh)) v for q, k, v of shape [B, h, n, dh].
template <typename T>
Tensor<T> softmax_attention(const Tensor<T>& q, const Tensor<T>& k,
                            const Tensor<T>& v);

}  // namespace vitdae
