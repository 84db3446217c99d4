#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "lagot/autodiff.hpp"
#include "lagot/rng.hpp"

using namespace lagot;

namespace {

// Independent oracle: central finite differences of the replayed tape output
// with respect to one input node.
std::vector<double> fd_gradient(const Tape& tape, std::vector<Tensor> inputs, int input_index,
                                double step = 1e-5) {
  std::vector<double> g(inputs[input_index].values.size());
  for (size_t i = 0; i < g.size(); ++i) {
    double saved = inputs[input_index].values[i];
    inputs[input_index].values[i] = saved + step;
    double hi = tape.forward(inputs).values[0];
    inputs[input_index].values[i] = saved - step;
    double lo = tape.forward(inputs).values[0];
    inputs[input_index].values[i] = saved;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

double rel_err(double a, double b) { return std::abs(a - b) / (std::abs(b) + 1e-12); }

}  // namespace

TEST_CASE("identity tape returns its input") {
  Tape t;
  auto x = t.input(Tensor::vector({1, 2, 3}));
  t.set_output(x);
  Tensor in = Tensor::vector({1, 2, 3});
  auto out = t.forward(std::vector<Tensor>{in});
  CHECK(out.values == std::vector<double>{1, 2, 3});
}

TEST_CASE("sum of squares forward") {
  Tape t;
  auto x = t.input(Tensor::vector({3, 4}));
  t.set_output(t.sum(t.elementwise(x, Nonlin::Square)));
  CHECK(t.scalar_value(t.output()) == 25.0);
}

TEST_CASE("two-layer tape with zero weights maps anything to zero") {
  Tape t;
  auto x = t.input(Tensor::vector({0.7, -1.3, 2.2}));
  auto w1 = t.constant(Tensor::matrix(4, 3, std::vector<double>(12, 0.0)));
  auto w2 = t.constant(Tensor::matrix(2, 4, std::vector<double>(8, 0.0)));
  auto y = t.matmul(w2, t.elementwise(t.matmul(w1, x), Nonlin::LeakyRelu, 0.01));
  t.set_output(t.sum(y));
  CHECK(t.scalar_value(t.output()) == 0.0);
  for (double v : t.value(y).values) CHECK(v == 0.0);
}

TEST_CASE("gradient of sum of squares") {
  Tape t;
  auto x = t.input(Tensor::vector({3, 4}));
  t.set_output(t.sum(t.elementwise(x, Nonlin::Square)));
  auto g = t.gradient(std::vector<Tape::NodeId>{x});
  CHECK(g[0].values == std::vector<double>{6, 8});
}

TEST_CASE("gradient of a linear map is its coefficient vector") {
  Tape t;
  auto x = t.input(Tensor::vector({0.3, 9.1}));
  auto a = t.constant(Tensor::vector({1, -2}));
  t.set_output(t.dot(a, x));
  auto g = t.gradient(std::vector<Tape::NodeId>{x});
  CHECK(g[0].values == std::vector<double>{1, -2});
}

TEST_CASE("random two-layer mlp input gradient matches finite differences") {
  Rng rng(7);
  Tape t;
  std::vector<double> xv(5), w1v(30), b1v(6), w2v(6);
  for (auto* vec : {&xv, &w1v, &b1v, &w2v})
    for (double& v : *vec) v = rng.uniform(-1.0, 1.0);
  auto x = t.input(Tensor::vector(xv));
  auto w1 = t.constant(Tensor::matrix(6, 5, w1v));
  auto b1 = t.constant(Tensor::vector(b1v));
  auto w2 = t.constant(Tensor::matrix(1, 6, w2v));
  auto h = t.elementwise(t.add(t.matmul(w1, x), b1), Nonlin::LeakyRelu, 0.01);
  t.set_output(t.slice(t.matmul(w2, h), 0, 1));
  auto g = t.gradient(std::vector<Tape::NodeId>{x});
  auto fd = fd_gradient(t, {Tensor::vector(xv)}, 0);
  for (size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(g[0].values[i], fd[i]) < 1e-6);
}

TEST_CASE("every primitive and nonlinearity agrees with finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::vector<double> xv(6), yv(6);
    for (double& v : xv) v = rng.uniform(0.2, 1.8);  // positive: sqrt/recip domains
    for (double& v : yv) v = rng.uniform(-1.5, 1.5);
    auto x = t.input(Tensor::matrix(2, 3, xv));
    auto y = t.input(Tensor::matrix(3, 2, yv));
    auto mm = t.matmul(x, y);                           // [2x2]
    auto h = t.hadamard(mm, mm);                        // hadamard composite
    auto sl = t.slice(h, 0, 4, {4});
    auto cat = t.concat({sl, t.scale(sl, -0.5)});       // [8]
    auto mixed = t.add(
        t.elementwise(t.slice(cat, 0, 4), Nonlin::Tanh),
        t.elementwise(t.slice(cat, 4, 4), Nonlin::Sin));
    auto more = t.add(mixed, t.elementwise(t.slice(x, 0, 4), Nonlin::Sqrt));
    auto more2 = t.add(more, t.elementwise(t.slice(x, 1, 4), Nonlin::Recip));
    auto more3 = t.add(more2, t.elementwise(t.slice(x, 2, 4), Nonlin::InvClamp1));
    auto more4 = t.add(more3, t.elementwise(t.slice(y, 0, 4), Nonlin::Sigmoid));
    auto more5 = t.add(more4, t.elementwise(t.slice(y, 1, 4), Nonlin::Exp));
    auto more6 = t.add(more5, t.elementwise(t.slice(y, 2, 4), Nonlin::Cos));
    t.set_output(t.dot(more6, t.elementwise(more6, Nonlin::LeakyRelu, 0.3)));

    std::vector<Tensor> inputs{Tensor::matrix(2, 3, xv), Tensor::matrix(3, 2, yv)};
    auto g = t.gradient(inputs, std::vector<Tape::NodeId>{x, y});
    for (int which = 0; which < 2; ++which) {
      auto fd = fd_gradient(t, inputs, which);
      for (size_t i = 0; i < fd.size(); ++i) {
        double analytic = g[static_cast<size_t>(which)].values[i];
        CHECK(std::abs(analytic - fd[i]) / (std::abs(analytic) + 1e-12) < 1e-5);
      }
    }
  }
}

TEST_CASE("gradient is linear over sums of objectives") {
  Rng rng(3);
  std::vector<double> xv(4);
  for (double& v : xv) v = rng.uniform(-1, 1);

  auto build = [&](int which) {
    Tape t;
    auto x = t.input(Tensor::vector(xv));
    Tape::NodeId f = t.sum(t.elementwise(x, Nonlin::Square));
    Tape::NodeId g = t.dot(x, t.constant(Tensor::vector({1, 2, 3, 4})));
    if (which == 0) t.set_output(f);
    if (which == 1) t.set_output(g);
    if (which == 2) t.set_output(t.add(f, g));
    auto grad = t.gradient(std::vector<Tape::NodeId>{x});
    return grad[0].values;
  };
  auto gf = build(0), gg = build(1), gsum = build(2);
  for (size_t i = 0; i < gf.size(); ++i) CHECK(std::abs(gsum[i] - (gf[i] + gg[i])) < 1e-12);
}

TEST_CASE("replay determinism is bit exact") {
  Rng rng(19);
  Tape t;
  std::vector<double> xv(9);
  for (double& v : xv) v = rng.uniform(-2, 2);
  auto x = t.input(Tensor::matrix(3, 3, xv));
  auto y = t.matmul(x, t.elementwise(x, Nonlin::Tanh));
  t.set_output(t.sum(t.hadamard(y, y)));

  std::vector<Tensor> inputs{Tensor::matrix(3, 3, xv)};
  auto a = t.forward(inputs);
  auto b = t.forward(inputs);
  CHECK(a.values == b.values);
  auto ga = t.gradient(inputs, std::vector<Tape::NodeId>{x});
  auto gb = t.gradient(inputs, std::vector<Tape::NodeId>{x});
  CHECK(ga[0].values == gb[0].values);
  // replay reproduces the eagerly recorded value bit for bit
  CHECK(a.values[0] == t.scalar_value(t.output()));
}

TEST_CASE("shape errors name the offending node") {
  Tape t;
  auto a = t.input(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  auto b = t.input(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS_AS(t.add(a, t.slice(b, 0, 4)), std::invalid_argument);
}

TEST_CASE("gradient requires scalar output and on-tape nodes") {
  Tape t;
  auto x = t.input(Tensor::vector({1, 2}));
  auto y = t.scale(x, 2.0);
  t.set_output(y);
  CHECK_THROWS_AS(t.gradient(std::vector<Tape::NodeId>{x}), std::invalid_argument);

  Tape t2;
  auto x2 = t2.input(Tensor::vector({1, 2}));
  t2.set_output(t2.sum(x2));
  CHECK_THROWS_AS(t2.gradient(std::vector<Tape::NodeId>{42}), std::invalid_argument);
}

TEST_CASE("forward validates input shapes against declarations") {
  Tape t;
  auto x = t.input(Tensor::vector({1, 2, 3}));
  t.set_output(t.sum(x));
  std::vector<Tensor> bad{Tensor::vector({1, 2})};
  CHECK_THROWS_AS(t.forward(bad), std::invalid_argument);
}

TEST_CASE("concat and slice round values through flat storage") {
  Tape t;
  auto a = t.input(Tensor::vector({1, 2}));
  auto b = t.input(Tensor::vector({3, 4, 5}));
  auto c = t.concat({a, b});
  CHECK(t.value(c).values == std::vector<double>{1, 2, 3, 4, 5});
  auto s = t.slice(c, 1, 3);
  CHECK(t.value(s).values == std::vector<double>{2, 3, 4});
  t.set_output(t.sum(s));
  auto g = t.gradient(std::vector<Tape::NodeId>{a, b});
  CHECK(g[0].values == std::vector<double>{0, 1});
  CHECK(g[1].values == std::vector<double>{1, 1, 0});
}

TEST_CASE("matmul supports matrix-vector and vector-matrix") {
  Tape t;
  auto m = t.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  auto v = t.input(Tensor::vector({1, 0, -1}));
  auto mv = t.matmul(m, v);
  CHECK(t.value(mv).values == std::vector<double>{-2, -2});
  auto r = t.input(Tensor::vector({1, -1}));
  auto rm = t.matmul(r, m);
  CHECK(t.value(rm).values == std::vector<double>{-3, -3, -3});
  t.set_output(t.dot(mv, r));
  auto g = t.gradient(std::vector<Tape::NodeId>{v});
  // d/dv of r^T M v = M^T r
  CHECK(g[0].values == std::vector<double>{-3, -3, -3});
}
