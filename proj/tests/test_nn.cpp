#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lagot/nn.hpp"
#include "lagot/rng.hpp"

using namespace lagot;

TEST_CASE("mlp with zero parameters outputs zero") {
  Rng rng(1);
  Mlp net = Mlp::create({3, 8, 8, 2}, rng);
  for (double& v : net.params.values) v = 0.0;
  auto y = net.eval(std::vector<double>{0.4, -2.0, 7.7});
  CHECK(y == std::vector<double>{0.0, 0.0});
}

TEST_CASE("single linear layer is the affine map") {
  Mlp net;
  net.layer_sizes = {1, 1};
  net.params = Tensor::vector({2.0, 1.0});  // W = [[2]], b = [1]
  auto y = net.eval(std::vector<double>{3.0});
  CHECK(y[0] == 7.0);
}

TEST_CASE("mlp rejects dimension mismatch") {
  Rng rng(1);
  Mlp net = Mlp::create({3, 4, 1}, rng);
  CHECK_THROWS_AS(net.eval(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("tape apply matches plain eval and input gradient matches differences") {
  Rng rng(23);
  Mlp net = Mlp::create({5, 16, 16, 1}, rng);
  std::vector<double> xv(5);
  for (double& v : xv) v = rng.uniform(-1, 1);

  Tape t;
  auto x = t.input(Tensor::matrix(1, 5, xv));
  auto out = net.apply_constant_params(t, x);
  t.set_output(t.sum(out));
  CHECK(t.scalar_value(t.output()) == doctest::Approx(net.eval(xv)[0]).epsilon(1e-12));

  auto g = t.gradient(std::vector<Tape::NodeId>{x});
  double step = 1e-6;
  for (int i = 0; i < 5; ++i) {
    auto hi = xv, lo = xv;
    hi[static_cast<size_t>(i)] += step;
    lo[static_cast<size_t>(i)] -= step;
    double fd = (net.eval(hi)[0] - net.eval(lo)[0]) / (2 * step);
    CHECK(std::abs(g[0].values[static_cast<size_t>(i)] - fd) /
              (std::abs(fd) + 1e-12) <
          1e-5);
  }
}

TEST_CASE("parameter count matches layer sizes") {
  CHECK(Mlp::param_count({2, 64, 64, 1}) == 2 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  Rng rng(5);
  Mlp net = Mlp::create({2, 64, 64, 1}, rng);
  CHECK(net.params.numel() == Mlp::param_count({2, 64, 64, 1}));
}

TEST_CASE("zero head scale zeroes the final layer only") {
  Rng rng(5);
  Mlp net = Mlp::create({2, 8, 3}, rng, 0.01, 0.0);
  auto y = net.eval(std::vector<double>{0.3, -0.7});
  CHECK(y == std::vector<double>{0.0, 0.0, 0.0});
  bool hidden_nonzero = false;
  for (int i = 0; i < 2 * 8; ++i) hidden_nonzero = hidden_nonzero || net.params[i] != 0.0;
  CHECK(hidden_nonzero);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged for all t") {
  AdamState s = AdamState::create(3, CosineSchedule::constant(1e-3));
  Tensor params = Tensor::vector({1.0, -2.0, 0.5});
  Tensor grad = Tensor::zeros({3});
  for (int i = 0; i < 5; ++i) {
    auto [p2, s2] = adam_step(s, params, grad);
    CHECK(p2.values == params.values);
    CHECK(s2.t == s.t + 1);
    s = s2;
    params = p2;
  }
}

TEST_CASE("first adam step moves by the learning rate") {
  AdamState s = AdamState::create(1, CosineSchedule::constant(1e-3));
  auto [p, s2] = adam_step(s, Tensor::vector({0.0}), Tensor::vector({2.0}));
  CHECK(std::abs(p.values[0] + 0.001) < 1e-6);
  CHECK(s2.t == 1);
}

TEST_CASE("constant schedule returns the same rate everywhere") {
  CosineSchedule s = CosineSchedule::constant(3e-4);
  for (int t : {0, 1, 7, 100, 100000}) CHECK(s.rate(t) == 3e-4);
}

TEST_CASE("cosine schedule endpoints are exact") {
  CosineSchedule s{1e-4, 1e-2, 1000};
  CHECK(std::abs(s.rate(0) - 1e-4) < 1e-12);
  CHECK(std::abs(s.rate(1000) - 1e-2) < 1e-12);
  CHECK(s.rate(500) == doctest::Approx(0.5 * (1e-4 + 1e-2)).epsilon(1e-10));
}

TEST_CASE("adam rejects non-finite gradients") {
  AdamState s = AdamState::create(2, CosineSchedule::constant(1e-3));
  Tensor params = Tensor::vector({0.0, 0.0});
  Tensor grad = Tensor::vector({1.0, std::nan("")});
  CHECK_THROWS_AS(adam_step(s, params, grad), std::runtime_error);
}

TEST_CASE("lbfgs solves an identity-hessian quadratic in at most two iterations") {
  auto f = [](std::span<const double> y, std::span<double> g) {
    double b0 = 3.0, b1 = -1.0;
    g[0] = y[0] - b0;
    g[1] = y[1] - b1;
    return 0.5 * (g[0] * g[0] + g[1] * g[1]);
  };
  auto res = lbfgs_minimize(f, {0.0, 0.0}, LbfgsConfig{});
  CHECK(res.value < 1e-16);
  CHECK(res.iterations <= 2);
  CHECK(std::abs(res.point[0] - 3.0) < 1e-8);
  CHECK(std::abs(res.point[1] + 1.0) < 1e-8);
}

TEST_CASE("lbfgs matches a gradient-descent oracle on rosenbrock") {
  auto rosen = [](std::span<const double> y, std::span<double> g) {
    double a = 1.0 - y[0];
    double b = y[1] - y[0] * y[0];
    g[0] = -2.0 * a - 400.0 * y[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsConfig cfg;
  cfg.max_iters = 200;
  auto res = lbfgs_minimize(rosen, {-1.2, 1.0}, cfg);
  CHECK(res.value < 1e-8);
  CHECK(std::abs(res.point[0] - 1.0) < 1e-3);
  CHECK(std::abs(res.point[1] - 1.0) < 1e-3);

  // plain gradient descent run to (rough) convergence lands on the same minimum
  std::vector<double> y{-1.2, 1.0}, g(2);
  for (int i = 0; i < 200000; ++i) {
    rosen(y, g);
    y[0] -= 1e-3 * g[0];
    y[1] -= 1e-3 * g[1];
  }
  double f_gd = rosen(y, g);
  CHECK(res.value <= f_gd + 1e-10);
  CHECK(std::abs(res.point[0] - y[0]) < 2e-2);
}

TEST_CASE("lbfgs returns a stationary start point unchanged") {
  auto f = [](std::span<const double> y, std::span<double> g) {
    g[0] = y[0];
    return 0.5 * y[0] * y[0];
  };
  auto res = lbfgs_minimize(f, {0.0}, LbfgsConfig{});
  CHECK(res.iterations == 0);
  CHECK(res.point[0] == 0.0);
}

TEST_CASE("lbfgs objective history is monotone non-increasing") {
  Rng rng(31);
  auto f = [](std::span<const double> y, std::span<double> g) {
    double v = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      double w = static_cast<double>(i + 1);
      g[i] = w * std::sin(y[i]) * std::cos(y[i]) * 2.0 + 0.2 * y[i];
      v += w * std::sin(y[i]) * std::sin(y[i]) + 0.1 * y[i] * y[i];
    }
    return v;
  };
  std::vector<double> y0(6);
  for (double& v : y0) v = rng.uniform(-2, 2);
  auto res = lbfgs_minimize(f, y0, LbfgsConfig{});
  for (size_t i = 1; i < res.value_history.size(); ++i)
    CHECK(res.value_history[i] <= res.value_history[i - 1] + 1e-14);
}

TEST_CASE("checkpoint write and read round-trips bit for bit") {
  Rng rng(77);
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({7});
  for (double& v : a.values) v = rng.normal();
  for (double& v : b.values) v = rng.normal();

  auto prefix = (std::filesystem::temp_directory_path() / "lagot_ckpt_test").string();
  save_checkpoint(prefix, {{"weights", &a}, {"bias", &b}});
  auto loaded = load_checkpoint(prefix);
  REQUIRE(loaded.count("weights") == 1);
  REQUIRE(loaded.count("bias") == 1);
  CHECK(loaded["weights"].shape == a.shape);
  CHECK(loaded["weights"].values == a.values);
  CHECK(loaded["bias"].values == b.values);
  std::filesystem::remove(prefix + ".manifest.txt");
  std::filesystem::remove(prefix + ".bin");
}
