#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pslab/optim.hpp"

using namespace pslab;

TEST_CASE("zero gradients and zero weight decay leave parameters fixed") {
  Tensor p({3}, {1.0, -2.0, 0.5});
  const std::vector<double> before = p.values();
  std::vector<double> vel;
  sgd_step(p, std::vector<double>(3, 0.0), vel, 0.1, 0.9, 0.0);
  CHECK(p.values() == before);

  std::vector<double> m, v;
  Tensor q({3}, {1.0, -2.0, 0.5});
  adam_step(q, std::vector<double>(3, 0.0), m, v, 1, 0.1, 0.0);
  CHECK(q.values() == before);
}

TEST_CASE("plain sgd scalar step decreases by lr * grad") {
  Tensor p({1}, {2.0});
  std::vector<double> vel;
  sgd_step(p, {1.0}, vel, 0.1, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("sgd with momentum and weight decay matches a reference loop") {
  // reference: v <- mu v + g + wd p; p <- p - lr v
  Prng rng(51);
  Tensor p({4});
  for (std::int64_t i = 0; i < 4; ++i) p[i] = rng.uniform(-1, 1);
  std::vector<double> ref = p.values();
  std::vector<double> vel, ref_vel(4, 0.0);
  const double lr = 0.05, mu = 0.9, wd = 0.01;
  for (int step = 0; step < 10; ++step) {
    std::vector<double> g(4);
    for (auto& gi : g) gi = rng.uniform(-1, 1);
    for (size_t i = 0; i < 4; ++i) {
      ref_vel[i] = mu * ref_vel[i] + g[i] + wd * ref[i];
      ref[i] -= lr * ref_vel[i];
    }
    sgd_step(p, g, vel, lr, mu, wd);
  }
  for (size_t i = 0; i < 4; ++i) CHECK(p[static_cast<std::int64_t>(i)] == doctest::Approx(ref[i]).epsilon(1e-15));
}

TEST_CASE("10-step adam on a 1-D quadratic matches the hand-rolled reference") {
  // minimize f(x) = (x - 3)^2 / 2, grad = x - 3
  const double lr = 0.1, wd = 0.0;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double ref = 0.0, rm = 0.0, rv = 0.0;
  Tensor p({1}, {0.0});
  std::vector<double> m, v;
  for (int t = 1; t <= 10; ++t) {
    const double g_ref = ref - 3.0;
    rm = beta1 * rm + (1 - beta1) * g_ref;
    rv = beta2 * rv + (1 - beta2) * g_ref * g_ref;
    const double mhat = rm / (1 - std::pow(beta1, t));
    const double vhat = rv / (1 - std::pow(beta2, t));
    ref -= lr * mhat / (std::sqrt(vhat) + eps);

    const double g_impl = p[0] - 3.0;
    adam_step(p, {g_impl}, m, v, t, lr, wd);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(std::abs(p[0] - 0.0) > 0.5);  // it actually moved toward 3
}

TEST_CASE("optimizer step applies to every parameter and respects kind") {
  ModelParameters params;
  params.add("a", Tensor({2}, {1.0, 1.0}));
  params.add("b", Tensor({1}, {5.0}));
  OptimConfig cfg;
  cfg.kind = OptimKind::sgd;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  Optimizer opt(cfg, params);
  opt.zero_grad();
  params.at("a").grad()[0] = 1.0;
  params.at("a").grad()[1] = -1.0;
  params.at("b").grad()[0] = 2.0;
  opt.step(0.5);
  CHECK(params.at("a")[0] == doctest::Approx(0.5));
  CHECK(params.at("a")[1] == doctest::Approx(1.5));
  CHECK(params.at("b")[0] == doctest::Approx(4.0));
}

TEST_CASE("optimizer state shape mismatches raise") {
  Tensor p({2}, 0.0);
  std::vector<double> vel;
  CHECK_THROWS_AS(sgd_step(p, std::vector<double>(3, 0.0), vel, 0.1, 0.0, 0.0), ShapeError);
}

TEST_CASE("optim config validation") {
  OptimConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  OptimConfig neg;
  neg.batch_size = 0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  CHECK(OptimConfig::mask_defaults().kind == OptimKind::sgd);
  CHECK(OptimConfig::mask_defaults().lr == doctest::Approx(1e-3));
  CHECK(OptimConfig::mask_defaults().momentum == doctest::Approx(0.9));
  CHECK(OptimConfig::mask_defaults().weight_decay == doctest::Approx(5e-5));
  CHECK(OptimConfig::depth_defaults().kind == OptimKind::adam);
  CHECK(OptimConfig::depth_defaults().lr == doctest::Approx(1e-4));
  CHECK(OptimConfig::depth_defaults().lr_halve_epoch == 500);
}
