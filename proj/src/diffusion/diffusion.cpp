// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "vitdae/error.hpp"

namespace vitdae {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_min, double beta_max) {
  check(steps >= 1, ErrorCode::kInvalidArgument, "schedule: T must be >= 1");
  check(beta_min > 0 && beta_min <= beta_max && beta_max < 1, ErrorCode::kInvalidArgument,
        "schedule: need 0 < beta_min <= beta_max < 1");
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i)
    betas[i] = steps == 1 ? beta_min
                          : beta_min + (beta_max - beta_min) * static_cast<double>(i) / (steps - 1);
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  check(!betas.empty(), ErrorCode::kInvalidArgument, "schedule: T must be >= 1");
  NoiseSchedule s;
  s.alpha_bars_.assign(betas.size() + 1, 1.0);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    check(betas[i] > 0 && betas[i] < 1, ErrorCode::kInvalidArgument,
          "schedule: beta_" + std::to_string(i + 1) + " outside (0,1)");
    s.alpha_bars_[i + 1] = s.alpha_bars_[i] * (1.0 - betas[i]);
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::beta(int t) const {
  check(t >= 1 && t <= steps(), ErrorCode::kInvalidArgument,
        "timestep " + std::to_string(t) + " outside [1," + std::to_string(steps()) + "]");
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  check(t >= 0 && t <= steps(), ErrorCode::kInvalidArgument,
        "timestep " + std::to_string(t) + " outside [0," + std::to_string(steps()) + "]");
  return alpha_bars_[t];
}

NoiseSchedule make_schedule(const ScheduleConfig& config) {
  check(config.kind == "linear", ErrorCode::kConfig,
        "schedule: unsupported kind '" + config.kind + "'");
  return NoiseSchedule::linear(config.steps, config.beta_min, config.beta_max);
}

StepPlan StepPlan::evenly_strided(int total_steps, int count, Direction direction) {
  check(count >= 1 && count <= total_steps, ErrorCode::kInvalidArgument,
        "step plan: need 1 <= steps <= T, got " + std::to_string(count));
  StepPlan plan;
  plan.direction = direction;
  if (count == 1) {
    plan.steps = {total_steps};
  } else {
    for (int i = 0; i < count; ++i)
      plan.steps.push_back(1 + static_cast<int>(std::lround(static_cast<double>(i) *
                                                            (total_steps - 1) / (count - 1))));
  }
  plan.validate(total_steps);
  return plan;
}

void StepPlan::validate(int total_steps) const {
  check(!steps.empty(), ErrorCode::kInvalidArgument, "step plan is empty");
  check(steps.front() >= 1 && steps.back() <= total_steps, ErrorCode::kInvalidArgument,
        "step plan leaves [1," + std::to_string(total_steps) + "]");
  for (std::size_t i = 1; i < steps.size(); ++i)
    check(steps[i] > steps[i - 1], ErrorCode::kInvalidArgument,
          "step plan is not strictly increasing");
}

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  check(a.shape() == b.shape(), ErrorCode::kShape,
        std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
            shape_str(b.shape()));
}

}  // namespace

template <typename T>
Tensor<T> forward_marginal(const Tensor<T>& x0, int t, const Tensor<T>& eps,
                           const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_marginal");
  const double abar = schedule.alpha_bar(t);
  const double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
  auto xd = x0.data();
  auto ed = eps.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(a * static_cast<double>(xd[i]) + b * static_cast<double>(ed[i]));
  return Tensor<T>(x0.shape(), std::move(out));
}

template <typename T>
Tensor<T> predict_x0(const Tensor<T>& x_t, const Tensor<T>& eps_hat, int t,
                     const NoiseSchedule& schedule) {
  require_same_shape(x_t, eps_hat, "predict_x0");
  const double abar = schedule.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(abar), b = std::sqrt(1.0 - abar);
  auto xd = x_t.data();
  auto ed = eps_hat.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>((static_cast<double>(xd[i]) - b * static_cast<double>(ed[i])) * inv);
  return Tensor<T>(x_t.shape(), std::move(out));
}

template <typename T>
Tensor<T> ddim_transfer(const Tensor<T>& x_from, const Tensor<T>& eps_hat, int t_from, int t_to,
                        const NoiseSchedule& schedule, bool clip_x0) {
  require_same_shape(x_from, eps_hat, "ddim");
  const double abar_from = schedule.alpha_bar(t_from);
  const double abar_to = schedule.alpha_bar(t_to);
  const double inv = 1.0 / std::sqrt(abar_from), b_from = std::sqrt(1.0 - abar_from);
  const double a_to = std::sqrt(abar_to), b_to = std::sqrt(1.0 - abar_to);
  auto xd = x_from.data();
  auto ed = eps_hat.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double e = static_cast<double>(ed[i]);
    double x0 = (static_cast<double>(xd[i]) - b_from * e) * inv;
    if (clip_x0) x0 = std::clamp(x0, -1.0, 1.0);
    out[i] = static_cast<T>(a_to * x0 + b_to * e);
  }
  return Tensor<T>(x_from.shape(), std::move(out));
}

template <typename T>
Tensor<T> ddim_step(const Tensor<T>& x_t, const Tensor<T>& eps_hat, int t, int t_prev,
                    const NoiseSchedule& schedule, bool clip_x0) {
  check(t_prev < t, ErrorCode::kInvalidArgument,
        "ddim_step: t_prev (" + std::to_string(t_prev) + ") must be below t (" +
            std::to_string(t) + ")");
  return ddim_transfer(x_t, eps_hat, t, t_prev, schedule, clip_x0);
}

template <typename T>
Tensor<T> ddim_sample(const Tensor<T>& x_T, const NoiseFn<T>& predictor, const std::type_identity_t<Tensor<T>>* z,
                      const StepPlan& plan, const NoiseSchedule& schedule, bool clip_x0) {
  plan.validate(schedule.steps());
  Tensor<T> x = x_T;
  for (std::size_t i = plan.steps.size(); i-- > 0;) {
    const int t = plan.steps[i];
    const int t_prev = i == 0 ? 0 : plan.steps[i - 1];
    Tensor<T> eps = predictor(x, t, z);
    check(eps.shape() == x.shape(), ErrorCode::kShape,
          "ddim_sample: predictor returned " + shape_str(eps.shape()) + " for input " +
              shape_str(x.shape()));
    x = ddim_step(x, eps, t, t_prev, schedule, clip_x0);
  }
  return x;
}

template <typename T>
Tensor<T> ddim_encode(const Tensor<T>& x0, const NoiseFn<T>& predictor, const std::type_identity_t<Tensor<T>>* z,
                      const StepPlan& plan, const NoiseSchedule& schedule) {
  plan.validate(schedule.steps());
  Tensor<T> x = x0;
  int t_from = 0;
  for (int t_to : plan.steps) {
    Tensor<T> eps = predictor(x, std::max(t_from, 1), z);
    check(eps.shape() == x.shape(), ErrorCode::kShape,
          "ddim_encode: predictor returned " + shape_str(eps.shape()) + " for input " +
              shape_str(x.shape()));
    x = ddim_transfer(x, eps, t_from, t_to, schedule, false);
    t_from = t_to;
  }
  return x;
}

#define VITDAE_INSTANTIATE_DIFFUSION(T)                                                         \
  template Tensor<T> forward_marginal(const Tensor<T>&, int, const Tensor<T>&,                  \
                                      const NoiseSchedule&);                                    \
  template Tensor<T> predict_x0(const Tensor<T>&, const Tensor<T>&, int, const NoiseSchedule&); \
  template Tensor<T> ddim_step(const Tensor<T>&, const Tensor<T>&, int, int,                    \
                               const NoiseSchedule&, bool);                                     \
  template Tensor<T> ddim_transfer(const Tensor<T>&, const Tensor<T>&, int, int,                \
                                   const NoiseSchedule&, bool);                                 \
  template Tensor<T> ddim_sample(const Tensor<T>&, const NoiseFn<T>&, const std::type_identity_t<Tensor<T>>*,         \
                                 const StepPlan&, const NoiseSchedule&, bool);                  \
  template Tensor<T> ddim_encode(const Tensor<T>&, const NoiseFn<T>&, const std::type_identity_t<Tensor<T>>*,         \
                                 const StepPlan&, const NoiseSchedule&);

VITDAE_INSTANTIATE_DIFFUSION(float)
VITDAE_INSTANTIATE_DIFFUSION(double)

}  // namespace vitdae
