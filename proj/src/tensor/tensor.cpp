// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "vitdae/error.hpp"

namespace vitdae {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool grad_enabled = true;
}  // namespace

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool enabled) { grad_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : node_(std::make_shared<detail::Node<T>>()) {
  check(shape_numel(shape) == values.size(), ErrorCode::kShape,
        "shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
            " values, got " + std::to_string(values.size()));
  node_->data = std::move(values);
  node_->shape = std::move(shape);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  check(defined(), ErrorCode::kState, "undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  check(axis < rank(), ErrorCode::kShape,
        "axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return defined() ? node_->data.size() : 0;
}

template <typename T>
std::span<T> Tensor<T>::data() const {
  check(defined(), ErrorCode::kState, "undefined tensor");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  check(numel() == 1, ErrorCode::kShape, "item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::grad() const {
  check(defined(), ErrorCode::kState, "undefined tensor");
  return node_->grad_buffer();
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  check(defined(), ErrorCode::kState, "undefined tensor");
  node_->requires_grad = on;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node_->data);
}

template <typename T>
void Tensor<T>::backward() const {
  check(defined(), ErrorCode::kState, "backward() on undefined tensor");
  check(numel() == 1, ErrorCode::kShape,
        "backward() needs a scalar loss, got shape " + shape_str(shape()));
  check(node_->requires_grad, ErrorCode::kState,
        "backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (parents first).
  using NodeT = detail::Node<T>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      NodeT* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (NodeT* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;

namespace detail {

template <typename T, typename Range>
Tensor<T> make_result_impl(Shape shape, std::vector<T> data, const Range& parents,
                           std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(node));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::initializer_list<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward) {
  return make_result_impl(std::move(shape), std::move(data), parents, std::move(backward));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& parents,
                      std::function<void(Node<T>&)> backward) {
  return make_result_impl(std::move(shape), std::move(data), parents, std::move(backward));
}

template Tensor<float> make_result(Shape, std::vector<float>, std::initializer_list<Tensor<float>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>,
                                    std::initializer_list<Tensor<double>>,
                                    std::function<void(Node<double>&)>);
template Tensor<float> make_result(Shape, std::vector<float>, const std::vector<Tensor<float>>&,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>,
                                    const std::vector<Tensor<double>>&,
                                    std::function<void(Node<double>&)>);

}  // namespace detail
}  // namespace vitdae
