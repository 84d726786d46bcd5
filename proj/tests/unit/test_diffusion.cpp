// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cmath>

#include "vitdae/diffusion.hpp"
#include "vitdae/error.hpp"
#include "vitdae/random.hpp"

using namespace vitdae;
using TD = Tensor<double>;

namespace {

// alpha_bar[1000] and alpha_bar[500] for the linear 1e-4..0.02 schedule,
// from an exact rational product rounded once to double.
constexpr double kAlphaBar1000 = 4.0358297653756835e-05;
constexpr double kAlphaBar500 = 0.07858724288177824;

// Schedule whose two levels have alpha_bar 0.7 and 0.25.
NoiseSchedule two_level() { return NoiseSchedule::from_betas({0.3, 1.0 - 0.25 / 0.7}); }

TD scalar1(double v) { return TD({1}, {v}); }

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("schedule construction") {
  auto s = NoiseSchedule::from_betas({0.5, 0.5});
  CHECK(s.alpha_bars() == std::vector<double>{1.0, 0.5, 0.25});
  auto one = NoiseSchedule::linear(1, 0.3, 0.3);
  CHECK(one.alpha_bars() == std::vector<double>{1.0, 0.7});

  auto lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
  CHECK(rel_close(lin.alpha_bar(1000), kAlphaBar1000, 1e-12));
  CHECK(rel_close(lin.alpha_bar(500), kAlphaBar500, 1e-12));
  CHECK(lin.beta(1) == 1e-4);
  CHECK(lin.beta(1000) == doctest::Approx(0.02).epsilon(1e-15));

  for (const auto* sched : {&s, &one, &lin}) {
    CHECK(sched->alpha_bar(0) == 1.0);
    for (int t = 1; t <= sched->steps(); ++t) {
      CHECK(sched->alpha_bar(t) < sched->alpha_bar(t - 1));
      CHECK(sched->alpha_bar(t) == sched->alpha_bar(t - 1) * (1.0 - sched->beta(t)));
    }
  }

  CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 0.05), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 1e-4, 1.0), Error);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.5}), Error);
  CHECK_THROWS_AS(make_schedule({10, 1e-4, 0.02, "cosine"}), Error);
  CHECK_THROWS_AS(lin.alpha_bar(1001), Error);
}

TEST_CASE("step plans") {
  auto p = StepPlan::evenly_strided(1000, 50);
  CHECK(p.steps.size() == 50);
  CHECK(p.steps.front() == 1);
  CHECK(p.steps.back() == 1000);
  CHECK(StepPlan::evenly_strided(1000, 1).steps == std::vector<int>{1000});
  CHECK(StepPlan::evenly_strided(5, 5).steps == std::vector<int>{1, 2, 3, 4, 5});
  CHECK_THROWS_AS(StepPlan::evenly_strided(10, 11), Error);
  StepPlan bad;
  bad.steps = {3, 3};
  CHECK_THROWS_AS(bad.validate(10), Error);
  bad.steps = {0, 3};
  CHECK_THROWS_AS(bad.validate(10), Error);
}

TEST_CASE("forward marginal and x0 prediction") {
  auto s = NoiseSchedule::from_betas({0.75});
  auto xt = forward_marginal(scalar1(2.0), 1, scalar1(1.0), s);
  CHECK(xt.item() == doctest::Approx(1.8660254).epsilon(1e-8));
  CHECK(predict_x0(scalar1(1.8660254037844386), scalar1(1.0), 1, s).item() ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(predict_x0(scalar1(1.0), scalar1(0.0), 1, s).item() == doctest::Approx(2.0));

  Rng rng(3);
  auto x0 = rng.normal_tensor<double>({2, 3, 4, 4});
  auto eps = rng.normal_tensor<double>({2, 3, 4, 4});
  auto lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
  auto same = forward_marginal(x0, 0, eps, lin);
  for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(same[i] == x0[i]);
  auto pure = forward_marginal(TD(x0.shape(), 0.0), 700, eps, lin);
  for (std::size_t i = 0; i < x0.numel(); ++i)
    CHECK(pure[i] == doctest::Approx(std::sqrt(1 - lin.alpha_bar(700)) * eps[i]).epsilon(1e-14));
  for (int t : {1, 250, 999}) {
    auto back = predict_x0(forward_marginal(x0, t, eps, lin), eps, t, lin);
    for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(std::abs(back[i] - x0[i]) < 1e-12 * std::max(1.0, 1.0 / std::sqrt(lin.alpha_bar(t))));
  }
  CHECK_THROWS_AS(forward_marginal(x0, 3, TD({2}), lin), Error);
  CHECK_THROWS_AS(forward_marginal(x0, 1001, eps, lin), Error);
  CHECK_THROWS_AS(predict_x0(x0, eps, -1, lin), Error);
}

TEST_CASE("ddim step") {
  auto s = two_level();
  const double expect = 0.6 * std::sqrt(0.7) + (-0.4) * std::sqrt(0.3);
  CHECK(expect == doctest::Approx(0.28290699291837884).epsilon(1e-15));
  auto xt = forward_marginal(scalar1(0.6), 2, scalar1(-0.4), s);
  auto out = ddim_step(xt, scalar1(-0.4), 2, 1, s, false);
  CHECK(std::abs(out.item() - expect) < 1e-12);

  // Landing on alpha_bar = 1 returns the x0 prediction.
  auto to_zero = ddim_step(xt, scalar1(-0.4), 2, 0, s, false);
  CHECK(std::abs(to_zero.item() - predict_x0(xt, scalar1(-0.4), 2, s).item()) < 1e-15);

  // Clipping bounds the x0 term before recombination.
  auto clipped = ddim_step(scalar1(5.0), scalar1(0.0), 2, 0, s, true);
  CHECK(clipped.item() == 1.0);

  CHECK_THROWS_AS(ddim_step(xt, scalar1(0.0), 1, 1, s, false), Error);
  CHECK_THROWS_AS(ddim_step(xt, scalar1(0.0), 1, 2, s, false), Error);

  SUBCASE("true eps maps onto the t_prev marginal") {
    auto lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
    Rng rng(4);
    auto x0 = rng.normal_tensor<double>({3, 8});
    auto eps = rng.normal_tensor<double>({3, 8});
    for (auto [t, tp] : {std::pair{1000, 980}, {500, 1}, {20, 0}}) {
      auto got = ddim_step(forward_marginal(x0, t, eps, lin), eps, t, tp, lin, false);
      auto want = forward_marginal(x0, tp, eps, lin);
      for (std::size_t i = 0; i < x0.numel(); ++i)
        CHECK(std::abs(got[i] - want[i]) < 1e-12 / std::sqrt(lin.alpha_bar(t)));
    }
  }
}

TEST_CASE("sampling and encoding chains") {
  auto lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(5);
  TD x0({2, 3, 4, 4});
  for (auto& v : x0.data()) v = rng.uniform() * 2 - 1;
  auto eps = rng.normal_tensor<double>(x0.shape());
  // With deterministic DDIM a predictor that always returns the true noise
  // keeps the chain on the forward marginals of x0.
  NoiseFn<double> oracle = [&](const TD&, int, const TD*) { return eps; };
  auto plan = StepPlan::evenly_strided(1000, 50);

  auto x_T = forward_marginal(x0, 1000, eps, lin);
  auto rec = ddim_sample(x_T, oracle, nullptr, plan, lin, false);
  for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(std::abs(rec[i] - x0[i]) < 1e-6);

  auto noise = ddim_encode(x0, oracle, nullptr, plan, lin);
  for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(std::abs(noise[i] - x_T[i]) < 1e-9);
  auto round_trip = ddim_sample(noise, oracle, nullptr, plan, lin, true);
  for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(std::abs(round_trip[i] - x0[i]) < 1e-6);

  SUBCASE("single step plan is x0 prediction at T") {
    StepPlan one{{1000}};
    int calls = 0;
    NoiseFn<double> fixed = [&](const TD&, int t, const TD*) {
      ++calls;
      CHECK(t == 1000);
      return eps;
    };
    auto got = ddim_sample(x_T, fixed, nullptr, one, lin, false);
    auto want = predict_x0(x_T, eps, 1000, lin);
    CHECK(calls == 1);
    for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(got[i] == want[i]);
  }

  SUBCASE("zero predictor encodes along the attenuation path") {
    std::vector<std::pair<int, TD>> seen;
    NoiseFn<double> zero = [&](const TD& x, int t, const TD*) {
      seen.emplace_back(t, x);
      return TD(x.shape(), 0.0);
    };
    StepPlan small{{1, 100, 400, 1000}};
    auto out = ddim_encode(x0, zero, nullptr, small, lin);
    // Visited levels 0, 1, 100, 400; the level-0 query uses t = 1.
    REQUIRE(seen.size() == 4);
    const int level[] = {0, 1, 100, 400};
    CHECK(seen[0].first == 1);
    for (std::size_t k = 1; k < 4; ++k) CHECK(seen[k].first == level[k]);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t i = 0; i < x0.numel(); ++i)
        CHECK(std::abs(seen[k].second[i] - std::sqrt(lin.alpha_bar(level[k])) * x0[i]) < 1e-12);
    for (std::size_t i = 0; i < x0.numel(); ++i)
      CHECK(std::abs(out[i] - std::sqrt(lin.alpha_bar(1000)) * x0[i]) < 1e-12);
  }

  SUBCASE("condition is forwarded and output shapes are checked") {
    TD z({2, 5}, 1.0);
    NoiseFn<double> needs_z = [&](const TD& x, int, const TD* cond) {
      CHECK(cond == &z);
      return TD(x.shape(), 0.0);
    };
    ddim_sample(x_T, needs_z, &z, plan, lin, true);
    NoiseFn<double> wrong = [](const TD&, int, const TD*) { return TD({3}); };
    CHECK_THROWS_AS(ddim_sample(x_T, wrong, nullptr, plan, lin, true), Error);
    CHECK_THROWS_AS(ddim_encode(x0, wrong, nullptr, plan, lin), Error);
  }

  SUBCASE("sampling is a pure function of its inputs") {
    NoiseFn<double> nonlinear = [](const TD& x, int t, const TD*) {
      TD y(x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::sin(x[i] * 3 + t * 1e-3);
      return y;
    };
    auto a = ddim_sample(x_T, nonlinear, nullptr, plan, lin, true);
    auto b = ddim_sample(x_T, nonlinear, nullptr, plan, lin, true);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("composed single-step noising matches the closed-form marginal") {
  auto lin = NoiseSchedule::linear(1000, 1e-4, 0.02);
  const double x0 = 1.0;
  const int draws = 10000;
  for (int t : {100, 300}) {
    Rng rng(Rng::derive(11, static_cast<std::uint64_t>(t)));
    double sum = 0, sum_sq = 0;
    for (int n = 0; n < draws; ++n) {
      double x = x0;
      for (int s = 1; s <= t; ++s)
        x = std::sqrt(1 - lin.beta(s)) * x + std::sqrt(lin.beta(s)) * rng.normal();
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    const double want_mean = forward_marginal(scalar1(x0), t, scalar1(0.0), lin).item();
    const double want_var = 1 - lin.alpha_bar(t);
    CHECK(std::abs(mean - want_mean) < 0.02 * want_mean);
    CHECK(std::abs(var - want_var) < 0.03 * want_var);
  }
}
