// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Gaussian noise schedules and the deterministic DDIM recurrences. Shape
// generic: the same code drives image decoding and latent code sampling.

#pragma once

#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "vitdae/tensor.hpp"

namespace vitdae {

struct ScheduleConfig {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  std::string kind = "linear";
};

class NoiseSchedule {
 public:
  // Linearly spaced betas from beta_min to beta_max over `steps` steps.
  static NoiseSchedule linear(int steps, double beta_min, double beta_max);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  // 1-based, t in [1, T].
  double beta(int t) const;
  // Cumulative product, t in [0, T]; alpha_bar(0) == 1.
  double alpha_bar(int t) const;
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

NoiseSchedule make_schedule(const ScheduleConfig& config);

// Strictly increasing timesteps in [1, T] visited by accelerated sampling.
struct StepPlan {
  enum class Direction { kGenerate, kEncode };

  std::vector<int> steps;
  Direction direction = Direction::kGenerate;

  // `count` steps spread evenly over [1, T], always ending at T. A single
  // step plan is {T}.
  static StepPlan evenly_strided(int total_steps, int count,
                                 Direction direction = Direction::kGenerate);
  void validate(int total_steps) const;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, for t in [0, T].
template <typename T>
Tensor<T> forward_marginal(const Tensor<T>& x0, int t, const Tensor<T>& eps,
                           const NoiseSchedule& schedule);

// (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
template <typename T>
Tensor<T> predict_x0(const Tensor<T>& x_t, const Tensor<T>& eps_hat, int t,
                     const NoiseSchedule& schedule);

// Deterministic DDIM update from t down to t_prev (sigma = 0). With clip_x0
// the x0 prediction is clamped to [-1, 1] before recombination.
template <typename T>
Tensor<T> ddim_step(const Tensor<T>& x_t, const Tensor<T>& eps_hat, int t, int t_prev,
                    const NoiseSchedule& schedule, bool clip_x0);

// Same recurrence between arbitrary levels; used upward for encoding.
template <typename T>
Tensor<T> ddim_transfer(const Tensor<T>& x_from, const Tensor<T>& eps_hat, int t_from, int t_to,
                        const NoiseSchedule& schedule, bool clip_x0);

// eps_theta(x_t, t, z); z may be null for unconditional models.
template <typename T>
using NoiseFn = std::function<Tensor<T>(const Tensor<T>& x_t, int t, const Tensor<T>* z)>;

// Runs the plan from its last step down to t = 0 and returns the x0 estimate.
template <typename T>
Tensor<T> ddim_sample(const Tensor<T>& x_T, const NoiseFn<T>& predictor, const std::type_identity_t<Tensor<T>>* z,
                      const StepPlan& plan, const NoiseSchedule& schedule, bool clip_x0 = true);

// Runs the plan upward from x0 and returns the noise map at the last step.
// The noise estimate at level 0 is queried at t = 1, the lowest trained step.
template <typename T>
Tensor<T> ddim_encode(const Tensor<T>& x0, const NoiseFn<T>& predictor, const std::type_identity_t<Tensor<T>>* z,
                      const StepPlan& plan, const NoiseSchedule& schedule);

}  // namespace vitdae
