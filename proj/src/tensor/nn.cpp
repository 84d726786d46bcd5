// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/nn.hpp"

#include <cmath>

#include "vitdae/error.hpp"

namespace vitdae {

template <typename T>
Tensor<T> ParameterSet<T>::add(const std::string& name, Shape shape) {
  for (const auto& [existing, tensor] : entries_)
    check(existing != name, ErrorCode::kInternal, "duplicate parameter name " + name);
  Tensor<T> t(std::move(shape));
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

template <typename T>
Tensor<T> ParameterSet<T>::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  fail(ErrorCode::kInvalidArgument, "unknown parameter " + name);
}

template <typename T>
std::vector<Tensor<T>> ParameterSet<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() const {
  for (const auto& e : entries_) e.second.zero_grad();
}

template <typename T>
void ParameterSet<T>::set_requires_grad(bool on) const {
  for (auto e : entries_) e.second.set_requires_grad(on);
}

template <typename T>
std::vector<T> ParameterSet<T>::flatten() const {
  std::vector<T> out;
  out.reserve(scalar_count());
  for (const auto& e : entries_) {
    auto d = e.second.data();
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

template <typename T>
void init_normal(const Tensor<T>& t, double stddev, Rng& rng) {
  for (auto& v : t.data()) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void init_uniform(const Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.data()) v = static_cast<T>(bound * (2.0 * rng.uniform() - 1.0));
}

template void init_normal(const Tensor<float>&, double, Rng&);
template void init_normal(const Tensor<double>&, double, Rng&);
template void init_uniform(const Tensor<float>&, double, Rng&);
template void init_uniform(const Tensor<double>&, double, Rng&);

template <typename To, typename From>
void copy_values(const ParameterSet<To>& dst, const ParameterSet<From>& src) {
  check(dst.entries().size() == src.entries().size(), ErrorCode::kInvalidArgument,
        "copy_values: parameter sets differ in size");
  for (std::size_t i = 0; i < dst.entries().size(); ++i) {
    const auto& [dn, dt] = dst.entries()[i];
    const auto& [sn, st] = src.entries()[i];
    check(dn == sn && dt.shape() == st.shape(), ErrorCode::kShape,
          "copy_values: mismatch at " + dn + " vs " + sn);
    auto s = st.data();
    auto d = dt.data();
    for (std::size_t j = 0; j < s.size(); ++j) d[j] = static_cast<To>(s[j]);
  }
}

template void copy_values(const ParameterSet<float>&, const ParameterSet<float>&);
template void copy_values(const ParameterSet<double>&, const ParameterSet<float>&);
template void copy_values(const ParameterSet<float>&, const ParameterSet<double>&);
template void copy_values(const ParameterSet<double>&, const ParameterSet<double>&);

template <typename T>
Tensor<T> timestep_embedding(const std::vector<int>& steps, std::size_t dim) {
  check(dim >= 2 && dim % 2 == 0, ErrorCode::kConfig, "time embedding dim must be even");
  const std::size_t half = dim / 2;
  Tensor<T> out({steps.size(), dim});
  auto d = out.data();
  for (std::size_t b = 0; b < steps.size(); ++b)
    for (std::size_t i = 0; i < half; ++i) {
      const double f = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
      const double arg = steps[b] * f;
      d[b * dim + i] = static_cast<T>(std::sin(arg));
      d[b * dim + half + i] = static_cast<T>(std::cos(arg));
    }
  return out;
}

template Tensor<float> timestep_embedding(const std::vector<int>&, std::size_t);
template Tensor<double> timestep_embedding(const std::vector<int>&, std::size_t);

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  check(config_.lr > 0, ErrorCode::kConfig, "adam: learning rate must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  double clip = 1.0;
  if (config_.grad_clip > 0) {
    double norm2 = 0;
    for (const auto& p : params_)
      if (p.has_grad())
        for (T g : p.grad()) norm2 += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm2);
    if (norm > config_.grad_clip) clip = config_.grad_clip / norm;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step = config_.lr / c1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = clip * static_cast<double>(g[j]);
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      w[j] -= static_cast<T>(step * m[j] / (std::sqrt(v[j] / c2) + config_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() const {
  for (const auto& p : params_) p.zero_grad();
}

template <typename T>
Ema<T>::Ema(std::vector<Tensor<T>> params, double decay)
    : params_(std::move(params)), decay_(decay) {
  check(decay > 0 && decay < 1, ErrorCode::kConfig, "ema: decay must be in (0,1)");
  for (const auto& p : params_) shadow_.emplace_back(p.data().begin(), p.data().end());
}

template <typename T>
void Ema<T>::update() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].data();
    auto& s = shadow_[i];
    for (std::size_t j = 0; j < w.size(); ++j)
      s[j] = static_cast<T>(decay_ * s[j] + (1.0 - decay_) * w[j]);
  }
}

template <typename T>
void Ema<T>::copy_to(const std::vector<Tensor<T>>& targets) const {
  check(targets.size() == shadow_.size(), ErrorCode::kInternal, "ema: target count mismatch");
  for (std::size_t i = 0; i < targets.size(); ++i)
    std::copy(shadow_[i].begin(), shadow_[i].end(), targets[i].data().begin());
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Adam<float>;
template class Adam<double>;
template class Ema<float>;
template class Ema<double>;

}  // namespace vitdae
