// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run all criteria with no arguments or one with
// --criterion N. Exits nonzero if any executed criterion fails.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grid_oracle.hpp"
#include "lagot/commands.hpp"
#include "lagot/config.hpp"
#include "lagot/metric_learn.hpp"
#include "lagot/nlot.hpp"

using namespace lagot;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// shared desk-scale configurations
// ---------------------------------------------------------------------------

NlotConfig desk_transport_config(uint64_t seed, int steps, int batch) {
  NlotConfig cfg;
  cfg.g_hidden = {32, 32};
  cfg.y_hidden = {32, 32};
  cfg.predictor_hidden = {32};
  cfg.knots = 8;
  cfg.quad = 16;
  cfg.batch = batch;
  cfg.lbfgs.max_iters = 5;
  cfg.g_rate_start = cfg.g_rate_end = 1e-3;
  cfg.y_rate_start = cfg.y_rate_end = 1e-3;
  cfg.predictor_rate = 1e-3;
  cfg.steps = steps;
  cfg.seed = seed;
  return cfg;
}

EmpiricalMeasure gaussian_measure(Rng& rng, double mx, double my, double sd, int n) {
  EmpiricalMeasure m;
  for (int i = 0; i < n; ++i)
    m.push_back(std::array<double, 2>{mx + sd * rng.normal(), my + sd * rng.normal()});
  return m;
}

// ---------------------------------------------------------------------------
// criterion 1: kinetic translation map
// ---------------------------------------------------------------------------

Outcome criterion_1() {
  Rng data_rng(2024);
  auto mu = gaussian_measure(data_rng, 0, 0, 0.1, 1024);
  auto nu = gaussian_measure(data_rng, 2, 0, 0.1, 1024);
  auto cfg = desk_transport_config(11, 2000, 256);
  auto L = LagrangianSpec::kinetic();
  auto state = train_nlot(mu, nu, L, cfg);

  auto held_out = gaussian_measure(data_rng, 0, 0, 0.1, 256);
  auto pushed = push_forward(state, L, held_out);
  double err = 0.0;
  for (int i = 0; i < held_out.size(); ++i) {
    auto x = held_out.point(i);
    auto y = pushed.point(i);
    err += std::hypot(y[0] - (x[0] + 2.0), y[1] - x[1]);
  }
  err /= held_out.size();
  Outcome o;
  o.pass = err < 0.1;
  std::ostringstream os;
  os << "mean map error " << err << " (tolerance 0.1)";
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 2: marginal W2 on the obstacle settings
// ---------------------------------------------------------------------------

Outcome criterion_2() {
  Outcome o;
  o.pass = true;
  std::ostringstream os;
  for (const std::string name : {"box", "slit", "hill", "well"}) {
    auto measures = generate(DatasetSpec{name, 1024, 5});
    auto cfg = desk_transport_config(17, 1500, 192);
    LagrangianSpec L = dataset_lagrangian(name);
    auto state = train_nlot(measures[0], measures[1], L, cfg);

    auto held_out = generate(DatasetSpec{name, 512, 1005});
    auto pushed = push_forward(state, L, held_out[0]);
    double w2 = 100.0 * w2_marginal_error(pushed, held_out[1]);
    os << name << " " << w2 << " ";
    if (!(w2 <= 5.0)) o.pass = false;
  }
  o.detail = "w2 x100: " + os.str() + "(bound 5.0 each)";
  return o;
}

// ---------------------------------------------------------------------------
// criterion 3: alignment scores for learned metrics
// ---------------------------------------------------------------------------

double desk_metric_run(const std::string& name, double threshold, std::ostringstream& os) {
  auto measures = generate(DatasetSpec{name, 100, 7});
  MetricLearnConfig cfg;
  cfg.inner = desk_transport_config(100, 0, 16);
  cfg.inner.g_hidden = {32, 32};
  cfg.inner.y_hidden = {32, 32};
  cfg.inner.predictor_hidden = {16};
  cfg.inner.knots = 6;
  cfg.inner.quad = 8;
  cfg.inner.lbfgs.max_iters = 3;
  cfg.inner.g_rate_start = cfg.inner.g_rate_end = 2e-3;
  cfg.inner.y_rate_start = cfg.inner.y_rate_end = 2e-3;
  cfg.rotation_hidden = {32, 32};
  cfg.metric_rate = 2e-3;
  cfg.metric_rate_end = 1e-4;
  cfg.metric_batch = 100;
  cfg.inner_updates_per_outer = 10;
  cfg.outer_steps = 300;
  cfg.seed = 1;
  auto state = train_metric(measures, cfg);

  auto grid = evaluation_grid(bounding_box(measures), 20, 20, 0.1);
  double score = alignment_score(ground_truth_metric(name),
                                 MetricField::learned(state.rotation_net), grid);
  os << name << " " << score << " (>= " << threshold << ") ";
  return score;
}

Outcome criterion_3() {
  Outcome o;
  o.pass = true;
  std::ostringstream os;
  if (desk_metric_run("circle", 0.95, os) < 0.95) o.pass = false;
  if (desk_metric_run("mass_splitting", 0.92, os) < 0.92) o.pass = false;
  if (desk_metric_run("x_paths", 0.90, os) < 0.90) o.pass = false;
  o.detail = "alignment: " + os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 4: circle geodesic against the grid oracle
// ---------------------------------------------------------------------------

Outcome criterion_4() {
  auto L = LagrangianSpec::with_metric(MetricField::circle(0.1));
  std::vector<double> x{1, 0}, y{0, 1};
  auto res = solve_geodesic(L, x, y, chord_phi(x, y, 30), 1500, 2e-2, {100});

  double max_dev = 0.0;
  for (int i = 0; i <= 400; ++i) {
    auto p = res.path.position(i / 400.0);
    max_dev = std::max(max_dev, std::abs(std::hypot(p[0], p[1]) - 1.0));
  }
  double oracle_len = lagot_test::grid_geodesic_length(MetricField::circle(0.1), {-0.25, -0.25},
                                                       {1.25, 1.25}, 200, 200, {1, 0}, {0, 1});
  double oracle_energy = 0.5 * oracle_len * oracle_len;
  double rel = std::abs(res.energy - oracle_energy) / oracle_energy;

  Outcome o;
  o.pass = max_dev < 0.05 && rel < 0.05;
  std::ostringstream os;
  os << "max ||gamma|-1| = " << max_dev << " (<0.05), energy " << res.energy << " vs oracle "
     << oracle_energy << ", rel " << rel << " (<0.05)";
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 5: kinetic displacement-cost identity
// ---------------------------------------------------------------------------

Outcome criterion_5() {
  Rng rng(31);
  auto L = LagrangianSpec::kinetic();
  auto predictor = SplinePredictor::create(12, 2, {32, 32}, rng);
  // start away from the chord so training does the work
  for (double& v : predictor.trunk.params.values) v += 0.02 * rng.normal();
  Rng sampler_rng(7);
  PairSampler sampler = [&](std::span<double> x, std::span<double> y) {
    for (int c = 0; c < 2; ++c) {
      x[c] = sampler_rng.uniform(-1, 1);
      y[c] = sampler_rng.uniform(-1, 1);
    }
  };
  PredictorTrainConfig cfg;
  cfg.steps = 2500;
  cfg.batch = 32;
  cfg.quadrature = {32};
  AdamState opt = AdamState::create(predictor.trunk.params.numel(), {2e-3, 1e-6, cfg.steps});
  train_spline_predictor(predictor, L, sampler, cfg, &opt);

  double worst = 0.0;
  int used = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> y{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    double exact = 0.5 * ((x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]));
    if (exact < 1e-3) continue;
    double c = displacement_cost(L, x, y, predictor, 0, 0.0, {32}).cost;
    worst = std::max(worst, std::abs(c - exact) / exact);
    ++used;
  }
  Outcome o;
  o.pass = worst < 1e-3 && used >= 90;
  std::ostringstream os;
  os << "worst relative error " << worst << " over " << used << " pairs (tolerance 1e-3)";
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 6: gradient suites
// ---------------------------------------------------------------------------

Outcome criterion_6() {
  std::ostringstream os;
  bool pass = true;

  // autodiff vs central differences on a random two-layer network
  {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Tape t;
      std::vector<double> xv(6), wv(24), w2v(4);
      for (double& v : xv) v = rng.uniform(-1, 1);
      for (double& v : wv) v = rng.uniform(-1, 1);
      for (double& v : w2v) v = rng.uniform(-1, 1);
      auto x = t.input(Tensor::vector(xv));
      auto w = t.constant(Tensor::matrix(4, 6, wv));
      auto w2 = t.constant(Tensor::matrix(1, 4, w2v));
      auto h = t.elementwise(t.matmul(w, x), Nonlin::LeakyRelu, 0.01);
      t.set_output(t.sum(t.elementwise(t.matmul(w2, h), Nonlin::Tanh)));
      std::vector<Tensor> inputs{Tensor::vector(xv)};
      auto g = t.gradient(inputs, std::vector<Tape::NodeId>{x});
      for (size_t i = 0; i < xv.size(); ++i) {
        auto pert = inputs;
        pert[0].values[i] += 1e-5;
        double hi = t.forward(pert).values[0];
        pert[0].values[i] -= 2e-5;
        double lo = t.forward(pert).values[0];
        double fd = (hi - lo) / 2e-5;
        worst = std::max(worst,
                         std::abs(g[0].values[i] - fd) / (std::abs(g[0].values[i]) + 1e-12));
      }
    }
    os << "autodiff-vs-fd " << worst << " (<1e-5) ";
    if (!(worst < 1e-5)) pass = false;
  }

  // Danskin gradient vs finite differences of the re-solved dual
  {
    NlotConfig cfg = desk_transport_config(5, 0, 8);
    cfg.g_hidden = {8};
    cfg.lbfgs.max_iters = 60;
    cfg.lbfgs.grad_tol = 1e-12;
    auto state = NlotState::create(cfg);
    auto L = LagrangianSpec::kinetic();
    std::vector<double> bx{0.4, -0.2}, by{0.9, 0.6};
    auto db = dual_loss_and_grads(state, L, bx, 1, by, 1);
    double worst = 0.0;
    for (int idx = 0; idx < state.g.params.numel(); idx += 3) {
      double saved = state.g.params[idx];
      state.g.params[idx] = saved + 1e-5;
      double hi = dual_loss_and_grads(state, L, bx, 1, by, 1).dual_loss;
      state.g.params[idx] = saved - 1e-5;
      double lo = dual_loss_and_grads(state, L, bx, 1, by, 1).dual_loss;
      state.g.params[idx] = saved;
      double fd = (hi - lo) / 2e-5;
      double analytic = -db.grad_theta.values[static_cast<size_t>(idx)];
      if (std::abs(fd) < 1e-10 && std::abs(analytic) < 1e-10) continue;
      worst = std::max(worst, std::abs(analytic - fd) / (std::abs(fd) + 1e-9));
    }
    os << "danskin-vs-fd " << worst << " (<1e-2) ";
    if (!(worst < 1e-2)) pass = false;
  }

  // envelope metric gradient vs finite differences over frozen paths
  {
    MetricLearnConfig cfg;
    cfg.inner = desk_transport_config(9, 0, 8);
    cfg.inner.knots = 6;
    cfg.inner.quad = 8;
    cfg.rotation_hidden = {16, 16};
    cfg.seed = 3;
    cfg.inner.seed = 303;
    auto state = MetricLearnState::create(cfg, 1);
    std::vector<double> batch{0.7, 0.1, -0.4, 0.9};
    auto grad = metric_grad(state, 0, batch, 2);

    auto L0 = state.lagrangian();
    std::vector<std::vector<double>> ys, phis;
    for (int i = 0; i < 2; ++i) {
      std::span<const double> x{batch.data() + static_cast<size_t>(i) * 2, 2};
      auto res = c_transform_solve(state.inner[0], L0, x);
      ys.push_back(res.y_hat);
      phis.push_back(state.inner[0].predictor.predict_phi(x, res.y_hat));
    }
    auto frozen = [&]() {
      LagrangianSpec L = state.lagrangian();
      double acc = 0.0;
      for (int i = 0; i < 2; ++i) {
        std::span<const double> x{batch.data() + static_cast<size_t>(i) * 2, 2};
        acc += path_energy(L, build_spline(x, ys[static_cast<size_t>(i)],
                                           phis[static_cast<size_t>(i)], 6),
                           {8});
      }
      return acc / 2;
    };
    double worst = 0.0;
    for (int idx = 0; idx < state.rotation_net.params.numel(); idx += 5) {
      double saved = state.rotation_net.params[idx];
      state.rotation_net.params[idx] = saved + 1e-5;
      double hi = frozen();
      state.rotation_net.params[idx] = saved - 1e-5;
      double lo = frozen();
      state.rotation_net.params[idx] = saved;
      double fd = (hi - lo) / 2e-5;
      double analytic = grad.values[static_cast<size_t>(idx)];
      if (std::abs(fd) < 1e-10 && std::abs(analytic) < 1e-10) continue;
      worst = std::max(worst, std::abs(analytic - fd) / (std::abs(fd) + 1e-9));
    }
    os << "envelope-vs-fd " << worst << " (<1e-2)";
    if (!(worst < 1e-2)) pass = false;
  }

  Outcome o;
  o.pass = pass;
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 7: spline invariants
// ---------------------------------------------------------------------------

Outcome criterion_7() {
  Rng rng(41);
  bool pass = true;
  std::ostringstream os;

  double worst_gap = 0.0;
  bool endpoints_exact = true;
  for (int trial = 0; trial < 10; ++trial) {
    int n = 4 + rng.uniform_int(10);
    std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<double> y{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<double> phi(static_cast<size_t>((n - 2) * 2));
    for (double& v : phi) v = rng.uniform(-2, 2);
    auto s = build_spline(x, y, phi, n);
    std::vector<double> pl(2), vl(2), al(2), pr(2), vr(2), ar(2);
    for (int j = 1; j <= n - 2; ++j) {
      double tk = s.knot_time(j);
      s.eval_segment(j - 1, tk, pl, vl, al);
      s.eval_segment(j, tk, pr, vr, ar);
      for (int c = 0; c < 2; ++c)
        worst_gap = std::max({worst_gap, std::abs(pl[c] - pr[c]), std::abs(vl[c] - vr[c]),
                              std::abs(al[c] - ar[c])});
    }
    auto p0 = s.position(0.0);
    auto p1 = s.position(1.0);
    for (int c = 0; c < 2; ++c)
      endpoints_exact = endpoints_exact && p0[c] == x[c] && p1[c] == y[c];
  }
  os << "worst C2 gap " << worst_gap << " (<1e-8), endpoints "
     << (endpoints_exact ? "exact" : "INEXACT");
  if (!(worst_gap < 1e-8) || !endpoints_exact) pass = false;

  auto hand = build_spline(std::vector<double>{0.0}, std::vector<double>{0.0},
                           std::vector<double>{1.0}, 3);
  double v = hand.position(0.25)[0];
  os << ", gamma(0.25) = " << v << " (expect 0.6875)";
  if (std::abs(v - 0.6875) > 1e-12) pass = false;

  Outcome o;
  o.pass = pass;
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 8: exact-OT oracle
// ---------------------------------------------------------------------------

Outcome criterion_8() {
  Rng rng(55);
  bool pass = true;
  std::ostringstream os;

  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + trial % 5;
    EmpiricalMeasure a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(std::array<double, 2>{rng.uniform(-2, 2), rng.uniform(-2, 2)});
      b.push_back(std::array<double, 2>{rng.uniform(-2, 2), rng.uniform(-2, 2)});
    }
    double fast = w2_marginal_error(a, b);
    // permutation brute force
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    double best = 1e300;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        auto pa = a.point(i);
        auto pb = b.point(perm[static_cast<size_t>(i)]);
        total += (pa[0] - pb[0]) * (pa[0] - pb[0]) + (pa[1] - pb[1]) * (pa[1] - pb[1]);
      }
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    worst = std::max(worst, std::abs(fast - std::sqrt(best / n)));
  }
  os << "assignment vs brute force, worst gap " << worst << " (exact)";
  if (!(worst < 1e-12)) pass = false;

  double worst_axiom = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    int n = 7;
    EmpiricalMeasure a, b, c;
    for (int i = 0; i < n; ++i) {
      a.push_back(std::array<double, 2>{rng.uniform(-2, 2), rng.uniform(-2, 2)});
      b.push_back(std::array<double, 2>{rng.uniform(-2, 2), rng.uniform(-2, 2)});
      c.push_back(std::array<double, 2>{rng.uniform(-2, 2), rng.uniform(-2, 2)});
    }
    double ab = w2_marginal_error(a, b), ba = w2_marginal_error(b, a);
    double ac = w2_marginal_error(a, c), cb = w2_marginal_error(c, b);
    worst_axiom = std::max(worst_axiom, std::abs(ab - ba));
    worst_axiom = std::max(worst_axiom, std::max(0.0, ab - (ac + cb)));
    worst_axiom = std::max(worst_axiom, w2_marginal_error(a, a));
  }
  os << ", metric axioms worst violation " << worst_axiom << " (<1e-9)";
  if (!(worst_axiom < 1e-9)) pass = false;

  Outcome o;
  o.pass = pass;
  o.detail = os.str();
  return o;
}

// ---------------------------------------------------------------------------
// criterion 9: bitwise determinism of a full run
// ---------------------------------------------------------------------------

Outcome criterion_9() {
  auto data_dir = fs::temp_directory_path() / "lagot_acc_data";
  fs::remove_all(data_dir);
  GenDataOptions gen{"hill", 64, 21, data_dir.string()};
  if (cmd_gen_data(gen) != 0) return {false, "gen-data failed"};

  std::string metrics[2];
  for (int i = 0; i < 2; ++i) {
    auto run_dir = fs::temp_directory_path() / ("lagot_acc_run" + std::to_string(i));
    fs::remove_all(run_dir);
    TrainOptions train;
    train.data_dir = data_dir.string();
    train.out_dir = run_dir.string();
    train.overrides = {"steps=25",          "batch=16",         "knots=6",
                       "quadrature=8",      "g.layers=16,16",   "y.layers=16,16",
                       "predictor.layers=16", "lbfgs.iters=3",  "eval.interval=5",
                       "eval.n=32",         "seed=77",          "lagrangian.kind=potential.hill",
                       "g.rate.start=0.001", "g.rate.end=0.001", "y.rate.start=0.001",
                       "y.rate.end=0.001",  "predictor.rate=0.001"};
    if (cmd_train(train) != 0) return {false, "train failed"};
    std::ifstream is(run_dir / "metrics.json");
    std::stringstream ss;
    ss << is.rdbuf();
    metrics[static_cast<size_t>(i)] = ss.str();
    fs::remove_all(run_dir);
  }
  fs::remove_all(data_dir);
  Outcome o;
  o.pass = !metrics[0].empty() && metrics[0] == metrics[1];
  o.detail = o.pass ? "two identical runs produced byte-identical metrics.json"
                    : "metrics.json differs between identical runs";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::map<int, std::function<Outcome()>> criteria{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3},
      {4, criterion_4}, {5, criterion_5}, {6, criterion_6},
      {7, criterion_7}, {8, criterion_8}, {9, criterion_9},
  };
  static const std::map<int, const char*> labels{
      {1, "kinetic translation map"},
      {2, "obstacle-setting marginal W2 (x100 <= 5.0)"},
      {3, "metric-recovery alignment scores"},
      {4, "circle geodesic vs grid oracle"},
      {5, "kinetic displacement-cost identity"},
      {6, "gradient suites (autodiff, Danskin, envelope)"},
      {7, "spline invariants"},
      {8, "exact-OT oracle"},
      {9, "run determinism"},
  };

  int only = -1;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (only > 0 && id != only) continue;
    Outcome o = fn();
    std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, labels.at(id),
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
