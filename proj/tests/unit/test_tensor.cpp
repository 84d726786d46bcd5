// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>

#include "../support/gradcheck.hpp"
#include "vitdae/checkpoint.hpp"
#include "vitdae/error.hpp"
#include "vitdae/nn.hpp"
#include "vitdae/tensor.hpp"

using namespace vitdae;
using vitdae::testing::gradcheck;
using vitdae::testing::project;
using vitdae::testing::projection_for;
using TD = Tensor<double>;

namespace {

std::vector<double> values(const TD& t) { return {t.data().begin(), t.data().end()}; }

TD random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_tensor<double>(std::move(shape));
}

}  // namespace

TEST_CASE("elementwise basics") {
  TD a({2}, {1, 2});
  TD b({2}, {3, 4});
  CHECK(values(add(a, b)) == std::vector<double>{4, 6});
  CHECK(values(scale(TD({2}, {2, -2}), 0.5)) == std::vector<double>{1, -1});
  CHECK(values(add(a, TD::scalar(1.0))) == std::vector<double>{2, 3});
  CHECK_THROWS_AS(add(a, TD({3}, {1, 2, 3})), vitdae::Error);
  try {
    mul(TD({2, 3}), TD({3, 2}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShape);
    CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("silu value and derivative at zero") {
  TD x({1}, {0.0});
  x.set_requires_grad(true);
  auto y = silu(x);
  CHECK(y.item() == 0.0);
  sum(y).backward();
  // d/dx x*sigmoid(x) = sigmoid(x) + x*sigmoid(x)*(1-sigmoid(x)) = 0.5 at 0.
  CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul examples") {
  TD eye({2, 2}, {1, 0, 0, 1});
  TD m({2, 2}, {1, 2, 3, 4});
  CHECK(values(matmul(eye, m)) == values(m));
  CHECK(values(matmul(TD({1, 2}, {1, 2}), TD({2, 1}, {3, 4}))) == std::vector<double>{11});
  CHECK_THROWS_AS(matmul(TD({2, 3}), TD({2, 3})), vitdae::Error);

  auto a = random_tensor({3, 4}, 1);
  auto b = random_tensor({4, 2}, 2);
  auto w = projection_for({3, 2}, 3);
  auto r = gradcheck([&](const std::vector<TD>& in) { return project(matmul(in[0], in[1]), w); },
                     {a, b});
  CHECK_MESSAGE(r.max_rel_err < 1e-6, r.worst);
}

TEST_CASE("conv2d examples") {
  SUBCASE("all-ones kernel sums the input") {
    TD x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto y = conv2d(x, TD({1, 1, 3, 3}, 1.0), TD(), 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 45.0);
  }
  SUBCASE("impulse response is the kernel (cross-correlation, so rotated 180 degrees)") {
    TD x({1, 1, 5, 5}, 0.0);
    x[2 * 5 + 2] = 1.0;
    auto k = random_tensor({1, 1, 3, 3}, 4);
    auto y = conv2d(x, k, TD(), 1, 1);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(y[(1 + i) * 5 + (1 + j)] == k[(2 - i) * 3 + (2 - j)]);
  }
  SUBCASE("random 2x3x8x8 gradients match finite differences") {
    auto x = random_tensor({2, 3, 8, 8}, 5);
    auto w = random_tensor({4, 3, 3, 3}, 6);
    auto b = random_tensor({4}, 7);
    auto p = projection_for({2, 4, 8, 8}, 8);
    auto r = gradcheck(
        [&](const std::vector<TD>& in) { return project(conv2d(in[0], in[1], in[2], 1, 1), p); },
        {x, w, b});
    CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
  }
  SUBCASE("strided gradients") {
    auto x = random_tensor({1, 2, 7, 7}, 9);
    auto w = random_tensor({3, 2, 3, 3}, 10);
    auto p = projection_for({1, 3, 4, 4}, 11);
    auto r = gradcheck(
        [&](const std::vector<TD>& in) { return project(conv2d(in[0], in[1], TD(), 2, 1), p); },
        {x, w});
    CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
  }
  SUBCASE("non-integral output extent is rejected") {
    CHECK_THROWS_AS(conv2d(TD({1, 1, 4, 4}), TD({1, 1, 3, 3}), TD(), 2, 0), vitdae::Error);
  }
}

TEST_CASE("normalization examples") {
  auto constant = layer_norm(TD({2, 4}, 3.0), TD(), TD(), 1e-5);
  for (double v : constant.data()) CHECK(v == 0.0);
  auto y = layer_norm(TD({1, 2}, {1, 3}), TD({2}, 1.0), TD({2}, 0.0), 1e-12);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(layer_norm(TD({1, 2}), TD(), TD(), 0.0), vitdae::Error);
  CHECK_THROWS_AS(group_norm(TD({1, 6, 2, 2}), 4, TD(), TD(), 1e-5), vitdae::Error);

  SUBCASE("group norm slices are standardized") {
    auto x = random_tensor({2, 6, 3, 3}, 12);
    auto z = group_norm(x, 3, TD(), TD(), 1e-12);
    for (std::size_t s = 0; s < 6; ++s) {
      double mu = 0, var = 0;
      for (std::size_t i = 0; i < 18; ++i) mu += z[s * 18 + i];
      mu /= 18;
      for (std::size_t i = 0; i < 18; ++i) var += (z[s * 18 + i] - mu) * (z[s * 18 + i] - mu);
      CHECK(std::abs(mu) < 1e-12);
      CHECK(var / 18 == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("gradients match finite differences") {
    auto x = random_tensor({2, 4, 3, 3}, 13);
    auto g = random_tensor({4}, 14);
    auto b = random_tensor({4}, 15);
    auto p = projection_for({2, 4, 3, 3}, 16);
    auto r = gradcheck(
        [&](const std::vector<TD>& in) { return project(group_norm(in[0], 2, in[1], in[2], 1e-5), p); },
        {x, g, b});
    CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
    auto lx = random_tensor({3, 5}, 17);
    auto lg = random_tensor({5}, 18);
    auto lb = random_tensor({5}, 19);
    auto lp = projection_for({3, 5}, 20);
    r = gradcheck(
        [&](const std::vector<TD>& in) { return project(layer_norm(in[0], in[1], in[2], 1e-5), lp); },
        {lx, lg, lb});
    CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
  }
}

TEST_CASE("softmax attention examples") {
  SUBCASE("single token returns v") {
    auto q = random_tensor({1, 2, 1, 3}, 21);
    auto k = random_tensor({1, 2, 1, 3}, 22);
    auto v = random_tensor({1, 2, 1, 3}, 23);
    CHECK(values(softmax_attention(q, k, v)) == values(v));
  }
  SUBCASE("identical keys give the mean of v") {
    auto q = random_tensor({1, 1, 4, 2}, 24);
    TD k({1, 1, 4, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7, 0.3, -0.7});
    auto v = random_tensor({1, 1, 4, 2}, 25);
    auto o = softmax_attention(q, k, v);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean_v = 0;
      for (std::size_t r = 0; r < 4; ++r) mean_v += v[r * 2 + c] / 4;
      for (std::size_t r = 0; r < 4; ++r) CHECK(o[r * 2 + c] == doctest::Approx(mean_v).epsilon(1e-12));
    }
  }
  SUBCASE("random 1x1x3x2 matches a scalar oracle") {
    auto q = random_tensor({1, 1, 3, 2}, 26);
    auto k = random_tensor({1, 1, 3, 2}, 27);
    auto v = random_tensor({1, 1, 3, 2}, 28);
    auto o = softmax_attention(q, k, v);
    for (int i = 0; i < 3; ++i) {
      double s[3], z = 0;
      for (int j = 0; j < 3; ++j) {
        s[j] = std::exp((q[i * 2] * k[j * 2] + q[i * 2 + 1] * k[j * 2 + 1]) / std::sqrt(2.0));
        z += s[j];
      }
      for (int c = 0; c < 2; ++c) {
        double expect = 0;
        for (int j = 0; j < 3; ++j) expect += s[j] / z * v[j * 2 + c];
        CHECK(o[i * 2 + c] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  SUBCASE("softmax rows sum to one") {
    auto p = softmax(scale(random_tensor({5, 7}, 29), 10.0));
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) total += p[r * 7 + c];
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
  SUBCASE("gradients and errors") {
    auto q = random_tensor({2, 2, 4, 3}, 30);
    auto k = random_tensor({2, 2, 4, 3}, 31);
    auto v = random_tensor({2, 2, 4, 3}, 32);
    auto p = projection_for({2, 2, 4, 3}, 33);
    auto r = gradcheck(
        [&](const std::vector<TD>& in) { return project(softmax_attention(in[0], in[1], in[2]), p); },
        {q, k, v});
    CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
    CHECK_THROWS_AS(softmax_attention(q, random_tensor({2, 2, 5, 3}, 1), v), vitdae::Error);
  }
}

TEST_CASE("backward contract") {
  auto x = random_tensor({3, 2}, 40);
  x.set_requires_grad(true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  sum(mul(x, x)).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 2 * x[i]);

  auto loss = sum(x);
  loss.backward();
  CHECK(loss.grad()[0] == 1.0);
  CHECK(loss.node()->parents.empty());  // tape released

  CHECK_THROWS_AS(mul(x, x).backward(), vitdae::Error);
}

TEST_CASE("gradient accumulation doubles grads") {
  auto w = random_tensor({4, 3}, 41);
  auto x = random_tensor({2, 4}, 42);
  w.set_requires_grad(true);
  auto run = [&] { sum(silu(matmul(x, w))).backward(); };
  run();
  std::vector<double> once(w.grad().begin(), w.grad().end());
  w.zero_grad();
  run();
  run();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2 * once[i]);
}

TEST_CASE("composite MLP gradients") {
  auto x = random_tensor({5, 4}, 50);
  auto w1 = random_tensor({4, 6}, 51);
  auto b1 = random_tensor({6}, 52);
  auto w2 = random_tensor({6, 3}, 53);
  auto b2 = random_tensor({3}, 54);
  auto target = random_tensor({5, 3}, 55);
  auto r = gradcheck(
      [&](const std::vector<TD>& p) {
        auto h = gelu(linear(x, p[0], p[1]));
        auto y = linear(layer_norm(h, TD(), TD(), 1e-5), p[2], p[3]);
        return mse_loss(y, target);
      },
      {w1, b1, w2, b2});
  CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
}

TEST_CASE("every differentiable op passes randomized finite-difference checks") {
  Rng shapes(60);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t a = 1 + shapes.uniform_int(0, 3);
    const std::size_t b = 1 + shapes.uniform_int(0, 3);
    const std::size_t c = 2 + shapes.uniform_int(0, 3);
    const std::uint64_t s = 100 + trial * 10;
    auto x = random_tensor({a, b, c}, s);
    auto y = random_tensor({a, b, c}, s + 1);
    auto pos = add_scalar(square(random_tensor({a, b, c}, s + 2)), 0.5);
    auto p = projection_for({a, b, c}, s + 3);
    using Fn = std::function<TD(const std::vector<TD>&)>;
    std::vector<std::pair<const char*, Fn>> cases = {
        {"add", [&](const std::vector<TD>& in) { return project(add(in[0], in[1]), p); }},
        {"sub", [&](const std::vector<TD>& in) { return project(sub(in[0], in[1]), p); }},
        {"mul", [&](const std::vector<TD>& in) { return project(mul(in[0], in[1]), p); }},
        {"scale", [&](const std::vector<TD>& in) { return project(scale(in[0], 1.7), p); }},
        {"silu", [&](const std::vector<TD>& in) { return project(silu(in[0]), p); }},
        {"gelu", [&](const std::vector<TD>& in) { return project(gelu(in[0]), p); }},
        {"exp", [&](const std::vector<TD>& in) { return project(exp(in[0]), p); }},
        {"softmax", [&](const std::vector<TD>& in) { return project(softmax(in[0]), p); }},
        {"permute", [&](const std::vector<TD>& in) {
           return sum(mul(permute(in[0], {2, 0, 1}), permute(p, {2, 0, 1})));
         }},
        {"slice+concat", [&](const std::vector<TD>& in) {
           auto left = slice(in[0], 2, 0, 1);
           auto right = slice(in[0], 2, 1, c - 1);
           return project(concat<double>({right, left}, 2), p);
         }},
        {"add_trailing", [&](const std::vector<TD>& in) {
           return project(add_trailing(in[0], reshape(slice(in[1], 0, 0, 1), {b, c})), p);
         }},
    };
    for (const auto& [name, fn] : cases) {
      auto r = gradcheck(fn, {x.detach(), y.detach()});
      CHECK_MESSAGE(r.max_rel_err < 1e-4, name << ": " << r.worst);
    }
    auto r = gradcheck([&](const std::vector<TD>& in) { return project(sqrt(in[0]), p); },
                       {pos.detach()});
    CHECK_MESSAGE(r.max_rel_err < 1e-4, "sqrt: " << r.worst);
  }
}

TEST_CASE("channel affine, upsample, pooling and cross entropy gradients") {
  auto x = random_tensor({2, 3, 2, 2}, 70);
  auto s = random_tensor({2, 3}, 71);
  auto b = random_tensor({2, 3}, 72);
  auto p = projection_for({2, 3, 4, 4}, 73);
  auto r = gradcheck(
      [&](const std::vector<TD>& in) {
        return project(upsample_nearest2x(channel_affine(in[0], in[1], in[2])), p);
      },
      {x, s, b});
  CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);

  auto logits = random_tensor({4, 3}, 74);
  std::vector<int> labels{0, 2, 1, 2};
  auto q = projection_for({2, 3}, 75);
  r = gradcheck(
      [&](const std::vector<TD>& in) {
        return add(cross_entropy(in[0], labels), project(global_avg_pool(in[1]), q));
      },
      {logits, x.detach()});
  CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
}

TEST_CASE("ops are bitwise deterministic") {
  auto run = [] {
    auto x = random_tensor({2, 3, 8, 8}, 80);
    auto w = random_tensor({4, 3, 3, 3}, 81);
    auto y = group_norm(conv2d(x, w, TD(), 1, 1), 2, TD(), TD(), 1e-5);
    auto t = permute(reshape(y, {2, 4, 64}), {0, 2, 1});
    auto q = reshape(t, {2, 1, 64, 4});
    return values(softmax_attention(q, q, q));
  };
  CHECK(run() == run());
}

TEST_CASE("parameter blobs round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vitdae_ckpt_test";
  fs::remove_all(dir);
  Rng rng(90);
  ParameterSet<float> params;
  for (int i = 0; i < 5; ++i) {
    Shape shape{static_cast<std::size_t>(1 + rng.uniform_int(0, 4)),
                static_cast<std::size_t>(1 + rng.uniform_int(0, 6))};
    auto t = params.add("p" + std::to_string(i), shape);
    init_normal(t, 3.0, rng);
  }
  Checkpoint ckpt;
  ckpt.meta["label"] = 3;
  append_records(ckpt, "net.", params);
  save_checkpoint(dir / "model", ckpt);
  CHECK(fs::file_size(dir / "model.bin") == params.scalar_count() * 4);

  ParameterSet<float> restored;
  for (const auto& [name, t] : params.entries()) restored.add(name, t.shape());
  auto loaded = load_checkpoint(dir / "model.json");
  CHECK(loaded.meta["label"] == 3);
  restore_records(loaded, "net.", restored);
  CHECK(restored.flatten() == params.flatten());

  ParameterSet<float> wrong;
  wrong.add("p0", {99});
  CHECK_THROWS_AS(restore_records(loaded, "net.", wrong), vitdae::Error);
  fs::remove_all(dir);
}
