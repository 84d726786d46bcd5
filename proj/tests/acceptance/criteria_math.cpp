// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "../support/eval_oracles.hpp"
#include "../support/gradcheck.hpp"
#include "acceptance.hpp"
#include "vitdae/diffusion.hpp"
#include "vitdae/encoder.hpp"
#include "vitdae/eval.hpp"
#include "vitdae/latent.hpp"
#include "vitdae/unet.hpp"

namespace vitdae::acceptance {

using testing::gradcheck;
using testing::project;
using testing::projection_for;
using TD = Tensor<double>;
using Loss = std::function<TD(const std::vector<TD>&)>;

namespace {

TD random_tensor(const Shape& shape, Rng& rng) { return rng.normal_tensor<double>(shape); }

// Values at least 0.1 away from zero, for kinked ops.
TD away_from_zero(const Shape& shape, Rng& rng) {
  TD t = random_tensor(shape, rng);
  for (auto& v : t.data()) v = v >= 0 ? v + 0.1 : v - 0.1;
  return t;
}

std::size_t pick(Rng& rng, int lo, int hi) { return static_cast<std::size_t>(rng.uniform_int(lo, hi)); }

struct GradCase {
  std::string name;
  Loss loss;
  std::vector<TD> inputs;
  std::size_t max_coords = 0;
};

template <typename Params>
void randomize(const Params& params, double stddev, Rng& rng) {
  for (const auto& [name, t] : params.entries()) init_normal(t, stddev, rng);
}

std::vector<GradCase> op_cases(Rng& rng) {
  std::vector<GradCase> cases;
  const std::size_t a = pick(rng, 1, 3), b = pick(rng, 1, 4), c = pick(rng, 2, 5);
  const Shape s3{a, b, c};
  const TD x = random_tensor(s3, rng), y = random_tensor(s3, rng);
  const TD p = projection_for(s3, rng.engine()());
  auto unary = [&](std::string name, std::function<TD(const TD&)> f, TD in) {
    cases.push_back({std::move(name), [f, p](const std::vector<TD>& v) { return project(f(v[0]), p); },
                     {std::move(in)}});
  };
  auto binary = [&](std::string name, std::function<TD(const TD&, const TD&)> f) {
    cases.push_back({std::move(name),
                     [f, p](const std::vector<TD>& v) { return project(f(v[0], v[1]), p); },
                     {x.detach(), y.detach()}});
  };
  binary("add", [](const TD& u, const TD& v) { return add(u, v); });
  binary("sub", [](const TD& u, const TD& v) { return sub(u, v); });
  binary("mul", [](const TD& u, const TD& v) { return mul(u, v); });
  cases.push_back({"mul(broadcast)",
                   [p](const std::vector<TD>& v) { return project(mul(v[0], v[1]), p); },
                   {x.detach(), random_tensor({1}, rng)}});
  unary("scale", [](const TD& u) { return scale(u, 1.7); }, x.detach());
  unary("add_scalar", [](const TD& u) { return add_scalar(u, -0.3); }, x.detach());
  unary("neg", [](const TD& u) { return neg(u); }, x.detach());
  unary("silu", [](const TD& u) { return silu(u); }, x.detach());
  unary("gelu", [](const TD& u) { return gelu(u); }, x.detach());
  unary("exp", [](const TD& u) { return exp(u); }, x.detach());
  unary("square", [](const TD& u) { return square(u); }, x.detach());
  unary("abs", [](const TD& u) { return abs(u); }, away_from_zero(s3, rng));
  unary("sqrt", [](const TD& u) { return sqrt(u); }, add_scalar(square(x), 0.5).detach());
  unary("softmax", [](const TD& u) { return softmax(u); }, x.detach());
  unary("reshape", [a, b, c](const TD& u) { return reshape(reshape(u, {a * b * c}), {a, b, c}); },
        x.detach());
  unary("permute", [](const TD& u) { return permute(permute(u, {2, 0, 1}), {1, 2, 0}); }, x.detach());
  unary("slice+concat", [c](const TD& u) {
    return concat<double>({slice(u, 2, 1, c - 1), slice(u, 2, 0, 1)}, 2);
  }, x.detach());
  const TD w_trail = projection_for({2, a, b, c}, rng.engine()());
  cases.push_back({"repeat_leading",
                   [w_trail](const std::vector<TD>& v) { return project(repeat_leading(v[0], 2), w_trail); },
                   {x.detach()}});
  cases.push_back({"add_trailing",
                   [p](const std::vector<TD>& v) { return project(add_trailing(v[0], v[1]), p); },
                   {x.detach(), random_tensor({b, c}, rng)}});
  cases.push_back({"sum", [](const std::vector<TD>& v) { return sum(square(v[0])); }, {x.detach()}});
  cases.push_back({"mean", [](const std::vector<TD>& v) { return mean(mul(v[0], v[0])); }, {x.detach()}});
  // Targets at least 0.1 away from the prediction so l1 stays smooth.
  const TD target = add(x, away_from_zero(s3, rng)).detach();
  cases.push_back({"l1_loss", [target](const std::vector<TD>& v) { return l1_loss(v[0], target); },
                   {x.detach()}});
  const TD pred = x.detach();
  cases.push_back({"l1_loss(target)", [pred](const std::vector<TD>& v) { return l1_loss(pred, v[0]); },
                   {target.detach()}});
  cases.push_back({"mse_loss", [](const std::vector<TD>& v) { return mse_loss(v[0], v[1]); },
                   {x.detach(), y.detach()}});

  const std::size_t n = pick(rng, 2, 5), k = pick(rng, 2, 5);
  std::vector<int> labels(n);
  for (auto& l : labels) l = rng.uniform_int(0, static_cast<int>(k) - 1);
  cases.push_back({"cross_entropy",
                   [labels](const std::vector<TD>& v) { return cross_entropy(v[0], labels); },
                   {random_tensor({n, k}, rng)}});

  const std::size_t m = pick(rng, 1, 4), inner = pick(rng, 1, 5), out = pick(rng, 1, 4);
  const TD pm = projection_for({m, out}, rng.engine()());
  cases.push_back({"matmul", [pm](const std::vector<TD>& v) { return project(matmul(v[0], v[1]), pm); },
                   {random_tensor({m, inner}, rng), random_tensor({inner, out}, rng)}});
  const TD pl = projection_for({a, m, out}, rng.engine()());
  cases.push_back({"linear",
                   [pl](const std::vector<TD>& v) { return project(linear(v[0], v[1], v[2]), pl); },
                   {random_tensor({a, m, inner}, rng), random_tensor({inner, out}, rng),
                    random_tensor({out}, rng)}});

  const std::size_t bc = pick(rng, 1, 2), cin = pick(rng, 1, 3), filters = pick(rng, 1, 3);
  const std::size_t ks = pick(rng, 1, 4), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
  const std::size_t hw = ks + pick(rng, 0, 3) + (stride - 1) * 2;
  std::size_t out_hw = 0;
  // Only extents that tile exactly.
  std::size_t h = hw;
  while ((h + 2 * pad - ks) % stride != 0) ++h;
  out_hw = (h + 2 * pad - ks) / stride + 1;
  const TD pc = projection_for({bc, filters, out_hw, out_hw}, rng.engine()());
  cases.push_back({"conv2d k" + std::to_string(ks) + " s" + std::to_string(stride) + " p" +
                       std::to_string(pad),
                   [pc, stride, pad](const std::vector<TD>& v) {
                     return project(conv2d(v[0], v[1], v[2], stride, pad), pc);
                   },
                   {random_tensor({bc, cin, h, h}, rng), random_tensor({filters, cin, ks, ks}, rng),
                    random_tensor({filters}, rng)}});

  const std::size_t groups = pick(rng, 1, 2), per = pick(rng, 1, 3), sp = pick(rng, 2, 3);
  const std::size_t channels = groups * per;
  const Shape img{bc, channels, sp, sp};
  const TD pg = projection_for(img, rng.engine()());
  cases.push_back({"group_norm",
                   [pg, groups](const std::vector<TD>& v) {
                     return project(group_norm(v[0], groups, v[1], v[2], 1e-5), pg);
                   },
                   {random_tensor(img, rng), random_tensor({channels}, rng), random_tensor({channels}, rng)}});
  cases.push_back({"layer_norm",
                   [p](const std::vector<TD>& v) { return project(layer_norm(v[0], v[1], v[2], 1e-5), p); },
                   {x.detach(), random_tensor({c}, rng), random_tensor({c}, rng)}});
  cases.push_back({"channel_affine",
                   [pg](const std::vector<TD>& v) { return project(channel_affine(v[0], v[1], v[2]), pg); },
                   {random_tensor(img, rng), random_tensor({bc, channels}, rng),
                    random_tensor({bc, channels}, rng)}});
  const TD pu = projection_for({bc, channels, 2 * sp, 2 * sp}, rng.engine()());
  cases.push_back({"upsample_nearest2x",
                   [pu](const std::vector<TD>& v) { return project(upsample_nearest2x(v[0]), pu); },
                   {random_tensor(img, rng)}});
  const TD pp = projection_for({bc, channels}, rng.engine()());
  cases.push_back({"global_avg_pool",
                   [pp](const std::vector<TD>& v) { return project(global_avg_pool(v[0]), pp); },
                   {random_tensor(img, rng)}});

  const std::size_t heads = pick(rng, 1, 2), tokens = pick(rng, 1, 4), dh = pick(rng, 1, 3);
  const Shape qs{bc, heads, tokens, dh};
  const TD pa = projection_for(qs, rng.engine()());
  cases.push_back({"softmax_attention",
                   [pa](const std::vector<TD>& v) { return project(softmax_attention(v[0], v[1], v[2]), pa); },
                   {random_tensor(qs, rng), random_tensor(qs, rng), random_tensor(qs, rng)}});
  return cases;
}

std::vector<GradCase> network_cases(Rng& rng) {
  std::vector<GradCase> cases;
  const std::size_t batch = pick(rng, 1, 2);
  const int size = rng.uniform_int(0, 1) == 0 ? 8 : 16;

  ViTConfig vc;
  vc.image_size = size;
  vc.channels = static_cast<int>(pick(rng, 1, 3));
  vc.patch_size = rng.uniform_int(0, 1) == 0 ? 4 : (size == 8 ? 2 : 8);
  vc.heads = static_cast<int>(pick(rng, 1, 2));
  vc.embed_dim = 4 * vc.heads;
  vc.depth = static_cast<int>(pick(rng, 1, 2));
  vc.mlp_ratio = 2;
  vc.code_dim = static_cast<int>(pick(rng, 2, 5));
  auto vit = std::make_shared<ViTEncoder<double>>(vc);
  randomize(vit->params(), 0.3, rng);
  const TD images = random_tensor({batch, static_cast<std::size_t>(vc.channels), static_cast<std::size_t>(size),
                                   static_cast<std::size_t>(size)}, rng);
  const TD pv = projection_for({batch, static_cast<std::size_t>(vc.code_dim)}, rng.engine()());
  cases.push_back({"vit encoder (params)",
                   [vit, images, pv](const std::vector<TD>&) { return project(vit->encode(images), pv); },
                   vit->params().tensors(), 4});
  cases.push_back({"vit encoder (input)",
                   [vit, pv](const std::vector<TD>& v) { return project(vit->encode(v[0]), pv); },
                   {images.detach()}, 24});

  UNetConfig uc;
  uc.image_size = 8;
  uc.in_channels = static_cast<int>(pick(rng, 1, 3));
  uc.groups = 2;
  uc.base_channels = 4 * static_cast<int>(pick(rng, 1, 2));
  uc.channel_mults = {1, 2};
  uc.res_blocks = 1;
  uc.attention_resolutions = {4};
  uc.attention_heads = 2;
  uc.time_dim = 8;
  uc.cond_dim = static_cast<int>(pick(rng, 2, 4));
  auto unet = std::make_shared<UNet<double>>(uc);
  randomize(unet->params(), 0.2, rng);
  const Shape xs{batch, static_cast<std::size_t>(uc.in_channels), 8, 8};
  const TD x = random_tensor(xs, rng);
  const TD z = random_tensor({batch, static_cast<std::size_t>(uc.cond_dim)}, rng);
  std::vector<int> steps(batch);
  for (auto& t : steps) t = rng.uniform_int(1, 1000);
  const TD pu = projection_for(xs, rng.engine()());
  cases.push_back({"unet (params)",
                   [unet, x, z, steps, pu](const std::vector<TD>&) {
                     return project(unet->predict_noise(x, steps, z), pu);
                   },
                   unet->params().tensors(), 2});
  cases.push_back({"unet (input, code)",
                   [unet, steps, pu](const std::vector<TD>& v) {
                     return project(unet->predict_noise(v[0], steps, v[1]), pu);
                   },
                   {x.detach(), z.detach()}, 16});

  LatentConfig lc{static_cast<int>(pick(rng, 2, 4)), 10, 6, 8};
  auto latent = std::make_shared<LatentDenoiser<double>>(lc);
  randomize(latent->params(), 0.3, rng);
  const TD zt = random_tensor({batch, static_cast<std::size_t>(lc.code_dim)}, rng);
  const TD pz = projection_for(zt.shape(), rng.engine()());
  cases.push_back({"latent denoiser (params)",
                   [latent, zt, steps, pz](const std::vector<TD>&) {
                     return project(latent->predict(zt, steps), pz);
                   },
                   latent->params().tensors(), 3});
  return cases;
}

}  // namespace

Outcome gradient_suite(const Options& opt) {
  const auto start = std::chrono::steady_clock::now();
  constexpr int kShapes = 20;
  Rng rng(20260101);
  double worst = 0;
  std::string worst_case;
  std::size_t checks = 0, failures = 0;
  for (int trial = 0; trial < kShapes; ++trial) {
    auto cases = op_cases(rng);
    // Both full networks at a randomized geometry every fourth shape.
    if (trial % 4 == 0)
      for (auto& c : network_cases(rng)) cases.push_back(std::move(c));
    for (const auto& c : cases) {
      const auto r = gradcheck(c.loss, c.inputs, 1e-4, c.max_coords, rng.engine()());
      ++checks;
      if (r.max_rel_err >= 1e-4) {
        ++failures;
        if (opt.verbose) std::cerr << "  gradient: " << c.name << " " << r.worst << "\n";
      }
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_case = c.name;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << kShapes << " shapes, " << checks << " checks, " << failures << " failed, max rel err " << worst
    << " (" << worst_case << "), " << secs << " s";
  return {failures == 0 && secs < 120.0, d.str()};
}

Outcome diffusion_algebra(const Options&) {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(2);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int t = rng.uniform_int(1, 1000);
    const int t_prev = rng.uniform_int(0, t - 1);
    const TD x0 = rng.normal_tensor<double>({2, 3, 4, 4});
    const TD eps = rng.normal_tensor<double>(x0.shape());
    const TD x_t = forward_marginal(x0, t, eps, sched);
    const double a_t = sched.alpha_bar(t), a_p = sched.alpha_bar(t_prev);
    // The noise that makes x_t consistent with x0.
    TD oracle(x0.shape());
    for (std::size_t i = 0; i < x0.numel(); ++i)
      oracle[i] = (x_t[i] - std::sqrt(a_t) * x0[i]) / std::sqrt(1 - a_t);
    const TD got = ddim_step(x_t, oracle, t, t_prev, sched, false);
    for (std::size_t i = 0; i < x0.numel(); ++i) {
      const double mean = std::sqrt(a_p) * x0[i] +
                          std::sqrt(1 - a_p) * (x_t[i] - std::sqrt(a_t) * x0[i]) / std::sqrt(1 - a_t);
      worst = std::max(worst, std::abs(got[i] - mean));
    }
  }

  // Monte-Carlo: compose single-step transitions and compare moments of x_t
  // with the closed-form marginal. x0 = 3 keeps the mean well above its
  // standard error (about 0.01 at 1e4 draws) at every t checked.
  const int draws = 10000;
  double worst_mean = 0, worst_var = 0;
  for (int t : {10, 100, 250, 400}) {
    Rng mc(Rng::derive(3, static_cast<std::uint64_t>(t)));
    const double x0 = 3.0;
    double sum = 0, sum_sq = 0;
    for (int n = 0; n < draws; ++n) {
      double x = x0;
      for (int s = 1; s <= t; ++s) x = std::sqrt(1 - sched.beta(s)) * x + std::sqrt(sched.beta(s)) * mc.normal();
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / draws, var = sum_sq / draws - mean * mean;
    const double want_mean = std::sqrt(sched.alpha_bar(t)) * x0, want_var = 1 - sched.alpha_bar(t);
    worst_mean = std::max(worst_mean, std::abs(mean - want_mean) / want_mean);
    worst_var = std::max(worst_var, std::abs(var - want_var) / want_var);
  }
  std::ostringstream d;
  d << "ddim mean max abs err " << worst << ", marginal mean rel err " << worst_mean
    << ", variance rel err " << worst_var;
  return {worst < 1e-12 && worst_mean < 0.02 && worst_var < 0.03, d.str()};
}

Outcome frechet_oracle_agreement(const Options&) {
  Rng rng(3);
  double worst = 0;
  for (int pair = 0; pair < 25; ++pair) {
    const auto d = pick(rng, 1, 8);
    auto draw = [&] {
      // A x with a random mixing matrix gives a random SPD covariance.
      const std::size_t n = 3 * d + 10;
      FeatureMatrix m{n, d, std::vector<double>(n * d)};
      std::vector<double> mix(d * d);
      for (auto& v : mix) v = rng.normal();
      const double shift = rng.normal();
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> g(d);
        for (auto& v : g) v = rng.normal();
        for (std::size_t r = 0; r < d; ++r) {
          double s = shift;
          for (std::size_t c = 0; c < d; ++c) s += mix[r * d + c] * g[c];
          m.values[i * d + r] = s;
        }
      }
      return feature_stats(m);
    };
    const auto a = draw(), b = draw();
    const double got = frechet_distance(a, b);
    const double want = testing::frechet_oracle(a, b, 1e-6);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  FeatureMatrix x{50, 4, std::vector<double>(200)};
  for (auto& v : x.values) v = rng.normal();
  const double self = frechet_distance(feature_stats(x), feature_stats(x));
  // 1-D: (mu1 - mu2)^2 + s1 + s2 - 2 sqrt(s1 s2) with s1 = 1, s2 = 4.
  FeatureStats one{1, 2, {0.0}, {1.0}}, four{1, 2, {1.0}, {4.0}};
  const double closed = frechet_distance(one, four, 0.0);
  std::ostringstream d;
  d << "25 SPD pairs max rel err " << worst << ", FD(X,X) " << self << ", 1-D " << closed << " (want 2)";
  return {worst < 1e-6 && std::abs(self) <= 1e-8 && closed == 2.0, d.str()};
}

Outcome precision_recall_oracle(const Options&) {
  Rng rng(4);
  std::size_t mismatches = 0;
  for (int config = 0; config < 50; ++config) {
    const std::size_t dim = pick(rng, 1, 6);
    auto draw = [&](std::size_t n, double shift) {
      FeatureMatrix m{n, dim, std::vector<double>(n * dim)};
      for (auto& v : m.values) v = shift + rng.normal();
      return m;
    };
    const auto real = draw(pick(rng, 4, 64), 0.0);
    const auto gen = draw(pick(rng, 4, 64), rng.uniform() * 2.0);
    const auto pr = improved_pr(estimate_manifold(real, 3), estimate_manifold(gen, 3));
    mismatches += pr.precision != testing::coverage_oracle(real, gen, 3);
    mismatches += pr.recall != testing::coverage_oracle(gen, real, 3);
  }
  FeatureMatrix cluster{10, 2, std::vector<double>(20)};
  for (auto& v : cluster.values) v = rng.normal();
  const auto same = improved_pr(estimate_manifold(cluster, 3), estimate_manifold(cluster, 3));
  FeatureMatrix far = cluster;
  for (auto& v : far.values) v += 1000.0;
  const auto apart = improved_pr(estimate_manifold(cluster, 3), estimate_manifold(far, 3));
  std::ostringstream d;
  d << "50 configs, " << mismatches << " mismatches; identical (" << same.precision << "," << same.recall
    << "); separated (" << apart.precision << "," << apart.recall << ")";
  return {mismatches == 0 && same.precision == 1 && same.recall == 1 && apart.precision == 0 &&
              apart.recall == 0,
          d.str()};
}

}  // namespace vitdae::acceptance
