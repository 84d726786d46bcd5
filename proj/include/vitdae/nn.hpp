// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Named parameter collections, initializers and optimizers shared by the
// encoder, noise predictor, latent denoiser and toy classifier.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vitdae/random.hpp"
#include "vitdae/tensor.hpp"

namespace vitdae {

template <typename T>
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  // Registers a zero-initialized trainable tensor.
  Tensor<T> add(const std::string& name, Shape shape);

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor<T> get(const std::string& name) const;
  std::vector<Tensor<T>> tensors() const;
  std::size_t scalar_count() const;

  void zero_grad() const;
  void set_requires_grad(bool on) const;
  // Every stored value, in registration order (used to assert freezing).
  std::vector<T> flatten() const;

 private:
  std::vector<Entry> entries_;
};

template <typename T>
void init_normal(const Tensor<T>& t, double stddev, Rng& rng);
template <typename T>
void init_uniform(const Tensor<T>& t, double bound, Rng& rng);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm clip; 0 disables
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig config);

  void step();
  void zero_grad() const;
  long long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  std::vector<Tensor<T>> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long long steps_ = 0;
};

// Exponential moving average of parameter values.
template <typename T>
class Ema {
 public:
  Ema(std::vector<Tensor<T>> params, double decay);
  void update();
  void copy_to(const std::vector<Tensor<T>>& targets) const;

 private:
  std::vector<Tensor<T>> params_;
  double decay_;
  std::vector<std::vector<T>> shadow_;
};

// Copies values between parameter sets registered in the same order with the
// same shapes, converting precision as needed.
template <typename To, typename From>
void copy_values(const ParameterSet<To>& dst, const ParameterSet<From>& src);

// Sinusoidal embedding [B, dim] of integer timesteps: the first half holds
// sin(t * f_i), the second half cos(t * f_i), with f_i = 10000^(-i / (dim/2)).
// Carries no gradient.
template <typename T>
Tensor<T> timestep_embedding(const std::vector<int>& steps, std::size_t dim);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Adam<float>;
extern template class Adam<double>;
extern template class Ema<float>;
extern template class Ema<double>;

}  // namespace vitdae
