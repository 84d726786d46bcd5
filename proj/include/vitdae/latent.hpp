// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Skip-connected MLP denoiser over normalized semantic codes, its L1
// training loss and DDIM code sampling.

#pragma once

#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitdae/diffusion.hpp"
#include "vitdae/nn.hpp"
#include "vitdae/random.hpp"
#include "vitdae/tensor.hpp"

namespace vitdae {

// Codes [N,d] tagged with whether they live in the z-scored domain.
template <typename T>
struct SemanticCodes {
  Tensor<T> values;
  bool normalized = false;
};

struct LatentConfig {
  int code_dim = 64;
  int layers = 10;
  int width = 256;
  int time_dim = 64;

  void validate() const;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LatentConfig, code_dim, layers, width, time_dim)

template <typename T>
class LatentDenoiser {
 public:
  explicit LatentDenoiser(LatentConfig config);

  const LatentConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Uniform(+-1/sqrt(fan_in)) weights, unit norm gains, zero biases and a
  // zero output layer.
  void init(Rng& rng);

  // z_t [B,d], one timestep per row -> predicted noise [B,d]. Every layer
  // sees concat(previous hidden, z_t, sinusoidal t embedding).
  Tensor<T> predict(const Tensor<T>& z_t, const std::vector<int>& steps) const;

 private:
  struct Layer {
    Tensor<T> w, b, ln_g, ln_b;  // ln_* undefined on the output layer
  };

  LatentConfig config_;
  ParameterSet<T> params_;
  std::vector<Layer> layers_;
};

// eps(z_t, per-row timesteps).
template <typename T>
using LatentNoiseFn = std::function<Tensor<T>(const Tensor<T>& z_t, const std::vector<int>& steps)>;

template <typename T>
LatentNoiseFn<T> as_noise_fn(const LatentDenoiser<T>& model);

// kL1 is the default. An L1 regression target is the per-coordinate
// conditional median of eps rather than its mean, so the sampler drifts on
// skewed code distributions (unequal mixtures lose their minority mode).
// kL2 regresses the mean and is the unbiased choice for the ODE sampler.
enum class LatentObjective { kL1, kL2 };

LatentObjective parse_latent_objective(const std::string& name);  // "l1" | "l2"
const char* latent_objective_name(LatentObjective objective);

// Per-element mean error between predicted and true noise for the given
// draws: batch mean of ||eps_hat - eps||_1 / d for kL1, squared for kL2.
template <typename T>
Tensor<T> latent_loss_at(const LatentNoiseFn<T>& eps_fn, const SemanticCodes<T>& codes,
                         const std::vector<int>& steps, const Tensor<T>& eps,
                         const NoiseSchedule& schedule,
                         LatentObjective objective = LatentObjective::kL1);

// Draws t ~ U{1..T} per row and eps ~ N(0, I), then evaluates the loss.
template <typename T>
Tensor<T> latent_loss(const LatentNoiseFn<T>& eps_fn, const SemanticCodes<T>& codes,
                      const NoiseSchedule& schedule, Rng& rng,
                      LatentObjective objective = LatentObjective::kL1);

// Draws z_T ~ N(0, I) [count, d] from `seed` and runs deterministic DDIM
// without clipping. Returns normalized codes.
template <typename T>
SemanticCodes<T> sample_code(const LatentNoiseFn<T>& eps_fn, std::size_t count, std::size_t dim,
                             const StepPlan& plan, const NoiseSchedule& schedule,
                             std::uint64_t seed);

extern template class LatentDenoiser<float>;
extern template class LatentDenoiser<double>;

}  // namespace vitdae
