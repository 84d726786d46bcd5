// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cmath>
#include <numbers>

#include "../support/gradcheck.hpp"
#include "vitdae/encoder.hpp"
#include "vitdae/error.hpp"
#include "vitdae/latent.hpp"

using namespace vitdae;
using vitdae::testing::gradcheck;
using vitdae::testing::project;
using vitdae::testing::projection_for;
using TD = Tensor<double>;

namespace {

LatentConfig small_latent(int dim, int width) {
  LatentConfig c;
  c.code_dim = dim;
  c.layers = 10;
  c.width = width;
  c.time_dim = 8;
  return c;
}

}  // namespace

TEST_CASE("latent loss") {
  auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(1);
  SemanticCodes<double> codes{rng.normal_tensor<double>({64, 8}), true};

  SUBCASE("true-noise oracle gives zero loss") {
    // Recovers the noise from z_t because it knows the clean codes.
    LatentNoiseFn<double> oracle = [&](const TD& z_t, const std::vector<int>& steps) {
      TD eps(z_t.shape());
      for (std::size_t i = 0; i < z_t.dim(0); ++i) {
        const double abar = sched.alpha_bar(steps[i]);
        for (std::size_t j = 0; j < 8; ++j)
          eps[i * 8 + j] =
              (z_t[i * 8 + j] - std::sqrt(abar) * codes.values[i * 8 + j]) / std::sqrt(1 - abar);
      }
      return eps;
    };
    Rng draw(2);
    auto loss = latent_loss(oracle, codes, sched, draw).item();
    CHECK(loss >= 0);
    CHECK(loss < 1e-9);
  }

  SUBCASE("zero predictor gives the half-normal mean per element") {
    LatentNoiseFn<double> zero = [](const TD& z_t, const std::vector<int>&) {
      return TD(z_t.shape(), 0.0);
    };
    SemanticCodes<double> many{TD({1563, 64}, 0.5), true};
    Rng draw(3);
    const double loss = latent_loss(zero, many, sched, draw).item();
    const double expect = std::sqrt(2.0 / std::numbers::pi);
    CHECK(std::abs(loss - expect) < 0.02 * expect);
  }

  SUBCASE("fixed draw matches a scalar oracle") {
    SemanticCodes<double> one{TD({1, 3}, {0.2, -1.0, 0.7}), true};
    TD eps({1, 3}, {0.5, 0.1, -2.0});
    LatentNoiseFn<double> lin = [](const TD& z_t, const std::vector<int>&) {
      return scale(z_t, 0.5);
    };
    const int t = 400;
    const double a = std::sqrt(sched.alpha_bar(t)), s = std::sqrt(1 - sched.alpha_bar(t));
    double expect = 0;
    for (std::size_t j = 0; j < 3; ++j)
      expect += std::abs(0.5 * (a * one.values[j] + s * eps[j]) - eps[j]);
    expect /= 3;
    CHECK(latent_loss_at(lin, one, {t}, eps, sched).item() == doctest::Approx(expect).epsilon(1e-14));

    double expect_sq = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double r = 0.5 * (a * one.values[j] + s * eps[j]) - eps[j];
      expect_sq += r * r;
    }
    expect_sq /= 3;
    CHECK(latent_loss_at(lin, one, {t}, eps, sched, LatentObjective::kL2).item() ==
          doctest::Approx(expect_sq).epsilon(1e-14));
  }

  SUBCASE("objective names") {
    CHECK(parse_latent_objective("l1") == LatentObjective::kL1);
    CHECK(parse_latent_objective("l2") == LatentObjective::kL2);
    CHECK(std::string(latent_objective_name(LatentObjective::kL2)) == "l2");
    CHECK_THROWS_AS(parse_latent_objective("huber"), Error);
  }

  SUBCASE("unnormalized codes are rejected") {
    SemanticCodes<double> raw{codes.values, false};
    LatentNoiseFn<double> zero = [](const TD& z_t, const std::vector<int>&) {
      return TD(z_t.shape(), 0.0);
    };
    Rng draw(4);
    CHECK_THROWS_AS(latent_loss(zero, raw, sched, draw), Error);
  }
}

TEST_CASE("latent denoiser") {
  CHECK_THROWS_AS(LatentDenoiser<double>(LatentConfig{3, 9, 4, 8}), Error);
  CHECK_THROWS_AS(LatentDenoiser<double>(LatentConfig{3, 21, 4, 8}), Error);

  LatentDenoiser<double> net(small_latent(3, 6));
  Rng rng(5);
  for (const auto& [name, t] : net.params().entries()) init_normal(t, 0.4, rng);
  auto z = rng.normal_tensor<double>({4, 3});
  const std::vector<int> steps{1, 10, 500, 1000};
  auto out = net.predict(z, steps);
  CHECK(out.shape() == z.shape());
  auto w = projection_for({4, 3}, 6);
  auto r = gradcheck([&](const std::vector<TD>&) { return project(net.predict(z, steps), w); },
                     net.params().tensors());
  CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  auto rz = gradcheck(
      [&](const std::vector<TD>& in) { return project(net.predict(in[0], steps), w); }, {z});
  CHECK_MESSAGE(rz.max_rel_err < 1e-4, rz.worst);

  LatentDenoiser<double> fresh(small_latent(3, 6));
  fresh.init(rng);
  auto zero_out = fresh.predict(z, steps);
  for (double v : zero_out.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(net.predict(rng.normal_tensor<double>({4, 2}), steps), Error);
}

TEST_CASE("code sampling") {
  auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  LatentNoiseFn<double> zero = [](const TD& z_t, const std::vector<int>&) {
    return TD(z_t.shape(), 0.0);
  };
  auto one_step = sample_code(zero, 5, 3, StepPlan{{1000}}, sched, 42);
  CHECK(one_step.normalized);
  Rng replay(42);
  auto z_T = replay.normal_tensor<double>({5, 3});
  for (std::size_t i = 0; i < 15; ++i)
    CHECK(one_step.values[i] == doctest::Approx(z_T[i] / std::sqrt(sched.alpha_bar(1000))).epsilon(1e-14));

  LatentDenoiser<double> net(small_latent(3, 6));
  Rng rng(7);
  for (const auto& [name, t] : net.params().entries()) init_normal(t, 0.2, rng);
  auto plan = StepPlan::evenly_strided(1000, 20);
  auto a = sample_code(as_noise_fn(net), 6, 3, plan, sched, 9);
  auto b = sample_code(as_noise_fn(net), 6, 3, plan, sched, 9);
  auto c = sample_code(as_noise_fn(net), 6, 3, plan, sched, 10);
  bool differs = false;
  for (std::size_t i = 0; i < 18; ++i) {
    CHECK(a.values[i] == b.values[i]);
    differs |= a.values[i] != c.values[i];
  }
  CHECK(differs);
}
