// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitdae/latent.hpp"

#include <algorithm>
#include <cmath>

#include "vitdae/error.hpp"

namespace vitdae {

void LatentConfig::validate() const {
  check(code_dim > 0 && width > 0, ErrorCode::kConfig, "latent: code_dim and width must be positive");
  check(layers >= 10 && layers <= 20, ErrorCode::kConfig,
        "latent: layers must be in [10,20], got " + std::to_string(layers));
  check(time_dim > 0 && time_dim % 2 == 0, ErrorCode::kConfig, "latent: time_dim must be even");
}

LatentObjective parse_latent_objective(const std::string& name) {
  if (name == "l1") return LatentObjective::kL1;
  if (name == "l2") return LatentObjective::kL2;
  throw Error(ErrorCode::kConfig, "latent objective must be l1 or l2, got '" + name + "'");
}

const char* latent_objective_name(LatentObjective objective) {
  return objective == LatentObjective::kL2 ? "l2" : "l1";
}

template <typename T>
LatentDenoiser<T>::LatentDenoiser(LatentConfig config) : config_(config) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.code_dim);
  const auto w = static_cast<std::size_t>(config_.width);
  const auto te = static_cast<std::size_t>(config_.time_dim);
  for (int i = 0; i < config_.layers; ++i) {
    const std::string pre = "layer" + std::to_string(i) + ".";
    const std::size_t in = (i == 0 ? 0 : w) + d + te;
    const bool last = i + 1 == config_.layers;
    Layer l;
    l.w = params_.add(pre + "w", {in, last ? d : w});
    l.b = params_.add(pre + "b", {last ? d : w});
    if (!last) {
      l.ln_g = params_.add(pre + "ln.g", {w});
      l.ln_b = params_.add(pre + "ln.b", {w});
    }
    layers_.push_back(l);
  }
}

template <typename T>
void LatentDenoiser<T>::init(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (i + 1 < layers_.size())
      init_uniform(l.w, 1.0 / std::sqrt(static_cast<double>(l.w.dim(0))), rng);
    else
      std::fill(l.w.data().begin(), l.w.data().end(), T(0));
    std::fill(l.b.data().begin(), l.b.data().end(), T(0));
    if (l.ln_g.defined()) {
      std::fill(l.ln_g.data().begin(), l.ln_g.data().end(), T(1));
      std::fill(l.ln_b.data().begin(), l.ln_b.data().end(), T(0));
    }
  }
}

template <typename T>
Tensor<T> LatentDenoiser<T>::predict(const Tensor<T>& z_t, const std::vector<int>& steps) const {
  const auto d = static_cast<std::size_t>(config_.code_dim);
  check(z_t.rank() == 2 && z_t.dim(1) == d, ErrorCode::kShape,
        "latent: expected codes [B," + std::to_string(d) + "], got " + shape_str(z_t.shape()));
  check(steps.size() == z_t.dim(0), ErrorCode::kShape, "latent: one timestep per code required");
  const auto temb = timestep_embedding<T>(steps, static_cast<std::size_t>(config_.time_dim));
  const auto skip = concat<T>({z_t, temb}, 1);
  Tensor<T> h;
  for (const auto& l : layers_) {
    h = linear(h.defined() ? concat<T>({h, skip}, 1) : skip, l.w, l.b);
    if (l.ln_g.defined()) h = silu(layer_norm(h, l.ln_g, l.ln_b, static_cast<T>(1e-5)));
  }
  return h;
}

template <typename T>
LatentNoiseFn<T> as_noise_fn(const LatentDenoiser<T>& model) {
  return [&model](const Tensor<T>& z_t, const std::vector<int>& steps) {
    return model.predict(z_t, steps);
  };
}

template <typename T>
Tensor<T> latent_loss_at(const LatentNoiseFn<T>& eps_fn, const SemanticCodes<T>& codes,
                         const std::vector<int>& steps, const Tensor<T>& eps,
                         const NoiseSchedule& schedule, LatentObjective objective) {
  check(codes.normalized, ErrorCode::kInvalidArgument,
        "latent loss: codes must be normalized before training the latent model");
  const auto& z = codes.values;
  check(z.rank() == 2 && z.dim(0) >= 1, ErrorCode::kShape,
        "latent loss: expected codes [B,d], got " + shape_str(z.shape()));
  check(eps.shape() == z.shape() && steps.size() == z.dim(0), ErrorCode::kShape,
        "latent loss: noise / timestep batch does not match codes");
  const std::size_t b = z.dim(0), d = z.dim(1);
  Tensor<T> z_t(z.shape());
  for (std::size_t i = 0; i < b; ++i) {
    check(steps[i] >= 1, ErrorCode::kInvalidArgument, "latent loss: timesteps start at 1");
    const double abar = schedule.alpha_bar(steps[i]);
    const double a = std::sqrt(abar), s = std::sqrt(1.0 - abar);
    for (std::size_t j = 0; j < d; ++j)
      z_t[i * d + j] = static_cast<T>(a * static_cast<double>(z[i * d + j]) +
                                      s * static_cast<double>(eps[i * d + j]));
  }
  const Tensor<T> pred = eps_fn(z_t, steps);
  return objective == LatentObjective::kL2 ? mse_loss(pred, eps) : l1_loss(pred, eps);
}

template <typename T>
Tensor<T> latent_loss(const LatentNoiseFn<T>& eps_fn, const SemanticCodes<T>& codes,
                      const NoiseSchedule& schedule, Rng& rng, LatentObjective objective) {
  check(codes.values.rank() == 2, ErrorCode::kShape, "latent loss: expected codes [B,d]");
  std::vector<int> steps(codes.values.dim(0));
  for (auto& t : steps) t = rng.uniform_int(1, schedule.steps());
  auto eps = rng.normal_tensor<T>(codes.values.shape());
  return latent_loss_at(eps_fn, codes, steps, eps, schedule, objective);
}

template <typename T>
SemanticCodes<T> sample_code(const LatentNoiseFn<T>& eps_fn, std::size_t count, std::size_t dim,
                             const StepPlan& plan, const NoiseSchedule& schedule,
                             std::uint64_t seed) {
  Rng rng(seed);
  auto z_T = rng.normal_tensor<T>({count, dim});
  NoiseFn<T> fn = [&](const Tensor<T>& x, int t, const Tensor<T>*) {
    auto eps = eps_fn(x, std::vector<int>(x.dim(0), t));
    check(eps.shape() == x.shape(), ErrorCode::kShape,
          "latent sampling: denoiser returned " + shape_str(eps.shape()));
    return eps.detach();
  };
  NoGradGuard no_grad;
  return {ddim_sample(z_T, fn, nullptr, plan, schedule, false), true};
}

#define VITDAE_INSTANTIATE_LATENT(T)                                                            \
  template class LatentDenoiser<T>;                                                             \
  template LatentNoiseFn<T> as_noise_fn(const LatentDenoiser<T>&);                              \
  template Tensor<T> latent_loss_at(const LatentNoiseFn<T>&, const SemanticCodes<T>&,           \
                                    const std::vector<int>&, const Tensor<T>&,                  \
                                    const NoiseSchedule&, LatentObjective);                     \
  template Tensor<T> latent_loss(const LatentNoiseFn<T>&, const SemanticCodes<T>&,              \
                                 const NoiseSchedule&, Rng&, LatentObjective);                  \
  template SemanticCodes<T> sample_code(const LatentNoiseFn<T>&, std::size_t, std::size_t,      \
                                        const StepPlan&, const NoiseSchedule&, std::uint64_t);

VITDAE_INSTANTIATE_LATENT(float)
VITDAE_INSTANTIATE_LATENT(double)

}  // namespace vitdae
