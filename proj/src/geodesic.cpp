#include "lagot/geodesic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lagot {

std::vector<double> quadrature_times(int nodes) {
  if (nodes < 2)
    throw std::invalid_argument("quadrature needs at least 2 nodes, got " +
                                std::to_string(nodes));
  std::vector<double> t(static_cast<size_t>(nodes));
  for (int q = 0; q < nodes; ++q)
    t[static_cast<size_t>(q)] = (static_cast<double>(q) + 0.5) / static_cast<double>(nodes);
  return t;
}

double path_energy(const LagrangianSpec& L, const PathSpline& s, EnergyQuadrature q) {
  auto times = quadrature_times(q.nodes);
  std::vector<double> pos(static_cast<size_t>(s.dim)), vel(static_cast<size_t>(s.dim));
  double acc = 0.0;
  for (double t : times) {
    s.position_into(t, pos);
    s.velocity_into(t, vel);
    double v = lagrangian_value(L, pos, vel);
    if (!std::isfinite(v))
      throw std::runtime_error("path energy: lagrangian is not finite at t = " +
                               std::to_string(t));
    acc += v;
  }
  return acc / static_cast<double>(q.nodes);
}

std::vector<Tensor> EnergyTape::make_inputs(std::span<const double> x, std::span<const double> y,
                                            std::span<const double> phi,
                                            const Tensor* params) const {
  std::vector<Tensor> inputs;
  inputs.reserve(has_params() ? 4 : 3);
  inputs.push_back(Tensor::vector({x.begin(), x.end()}));
  inputs.push_back(Tensor::vector({y.begin(), y.end()}));
  inputs.push_back(Tensor::vector({phi.begin(), phi.end()}));
  if (has_params()) {
    if (params == nullptr)
      throw std::invalid_argument("energy tape expects rotation-net parameters");
    inputs.push_back(*params);
  }
  return inputs;
}

double EnergyTape::value(std::span<const Tensor> inputs, Tape::Workspace& ws) const {
  return tape.forward(inputs, ws).values[0];
}

EnergyTape build_energy_tape(const LagrangianSpec& L, std::span<const double> x,
                             std::span<const double> y, std::span<const double> phi,
                             int knot_count, EnergyQuadrature q, bool params_as_input) {
  int d = static_cast<int>(x.size());
  if (static_cast<int>(phi.size()) != (knot_count - 2) * d)
    throw std::invalid_argument("energy tape: phi has " + std::to_string(phi.size()) +
                                " values, expected " + std::to_string((knot_count - 2) * d));
  auto times = quadrature_times(q.nodes);
  SplineBasis basis = spline_basis(knot_count, times);

  EnergyTape et;
  et.knot_count = knot_count;
  et.dim = d;
  et.quad_nodes = q.nodes;
  Tape& t = et.tape;
  et.x_in = t.input(Tensor::vector({x.begin(), x.end()}));
  et.y_in = t.input(Tensor::vector({y.begin(), y.end()}));
  et.phi_in = t.input(Tensor::vector({phi.begin(), phi.end()}));
  if (params_as_input && L.has_learned_metric())
    et.params_in = t.input(L.metric.rotation_net.params);

  auto knots = t.concat({et.x_in, et.phi_in, et.y_in}, {knot_count, d});
  auto P = t.constant(Tensor::matrix(q.nodes, knot_count, basis.pos_weights));
  auto V = t.constant(Tensor::matrix(q.nodes, knot_count, basis.vel_weights));
  auto pos = t.matmul(P, knots);
  auto vel = t.matmul(V, knots);
  et.energy = append_mean_lagrangian(t, L, pos, vel, q.nodes, et.params_in);
  t.set_output(et.energy);
  return et;
}

namespace {

// Adam descent on phi over a prebuilt energy tape; returns the best-seen
// (lowest-energy) iterate, so more steps can never end worse.
void refine_phi(const EnergyTape& et, std::span<const double> x, std::span<const double> y,
                std::vector<double>& phi, double& energy, int steps, double rate) {
  std::vector<Tensor> inputs = et.make_inputs(x, y, phi);
  Tape::Workspace ws;
  energy = et.tape.forward(inputs, ws).values[0];
  if (!std::isfinite(energy)) throw std::runtime_error("geodesic solve: initial energy not finite");
  if (steps <= 0) return;

  std::vector<double> best_phi = phi;
  double best_energy = energy;
  AdamState opt = AdamState::create(static_cast<int>(phi.size()),
                                    CosineSchedule::constant(rate));
  Tensor phi_t = Tensor::vector({phi.begin(), phi.end()});
  std::vector<Tape::NodeId> wrt{et.phi_in};
  for (int step = 0; step < steps; ++step) {
    auto grads = et.tape.gradient(inputs, wrt, ws);
    adam_step_inplace(opt, phi_t, grads[0]);
    inputs[2] = phi_t;
    double e = et.tape.forward(inputs, ws).values[0];
    if (!std::isfinite(e) || e > 1e12)
      throw std::runtime_error("geodesic solve diverged at step " + std::to_string(step) +
                               " (energy " + std::to_string(e) + ")");
    if (e < best_energy) {
      best_energy = e;
      best_phi = phi_t.values;
    }
  }
  phi = std::move(best_phi);
  energy = best_energy;
}

}  // namespace

GeodesicResult solve_geodesic(const LagrangianSpec& L, std::span<const double> x,
                              std::span<const double> y, std::span<const double> init_phi,
                              int steps, double rate, EnergyQuadrature q) {
  int d = static_cast<int>(x.size());
  int n = static_cast<int>(init_phi.size()) / std::max(d, 1) + 2;
  EnergyTape et = build_energy_tape(L, x, y, init_phi, n, q, false);
  GeodesicResult res;
  res.phi.assign(init_phi.begin(), init_phi.end());
  refine_phi(et, x, y, res.phi, res.energy, steps, rate);
  res.path = build_spline(x, y, res.phi, n);
  return res;
}

// ---------------------------------------------------------------------------
// SplinePredictor
// ---------------------------------------------------------------------------

SplinePredictor SplinePredictor::create(int knot_count, int dim, std::vector<int> hidden,
                                        Rng& rng) {
  SplinePredictor p;
  p.knot_count = knot_count;
  p.dim = dim;
  std::vector<int> sizes;
  sizes.push_back(2 * dim);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back((knot_count - 2) * dim);
  p.trunk = Mlp::create(std::move(sizes), rng, 0.01, 0.0);
  return p;
}

Tensor SplinePredictor::chord_matrix() const {
  int d = dim, n = knot_count;
  Tensor C = Tensor::zeros({2 * d, (n - 2) * d});
  for (int j = 1; j + 1 < n; ++j) {
    double tj = static_cast<double>(j) / static_cast<double>(n - 1);
    for (int c = 0; c < d; ++c) {
      C.values[static_cast<size_t>(c) * (n - 2) * d + (j - 1) * d + c] = 1.0 - tj;
      C.values[static_cast<size_t>(d + c) * (n - 2) * d + (j - 1) * d + c] = tj;
    }
  }
  return C;
}

std::vector<double> SplinePredictor::predict_phi(std::span<const double> x,
                                                 std::span<const double> y) const {
  std::vector<double> xy(x.begin(), x.end());
  xy.insert(xy.end(), y.begin(), y.end());
  std::vector<double> phi = trunk.eval(xy);
  for (int j = 1; j + 1 < knot_count; ++j) {
    double tj = static_cast<double>(j) / static_cast<double>(knot_count - 1);
    for (int c = 0; c < dim; ++c)
      phi[static_cast<size_t>(j - 1) * dim + c] +=
          x[static_cast<size_t>(c)] + tj * (y[static_cast<size_t>(c)] - x[static_cast<size_t>(c)]);
  }
  return phi;
}

Tape::NodeId SplinePredictor::apply(Tape& t, Tape::NodeId xy, Tape::NodeId trunk_params) const {
  return t.add(trunk.apply(t, xy, trunk_params), t.matmul(xy, t.constant(chord_matrix())));
}

// ---------------------------------------------------------------------------
// Displacement cost
// ---------------------------------------------------------------------------

DisplacementResult displacement_cost(const LagrangianSpec& L, std::span<const double> x,
                                     std::span<const double> y, const SplinePredictor& predictor,
                                     int fine_tune_steps, double fine_tune_rate,
                                     EnergyQuadrature q) {
  if (static_cast<int>(x.size()) != predictor.dim)
    throw std::invalid_argument("displacement cost: predictor dimension mismatch");
  DisplacementResult res;
  res.phi = predictor.predict_phi(x, y);
  EnergyTape et = build_energy_tape(L, x, y, res.phi, predictor.knot_count, q, false);
  refine_phi(et, x, y, res.phi, res.cost, fine_tune_steps, fine_tune_rate);
  res.path = build_spline(x, y, res.phi, predictor.knot_count);
  return res;
}

CostGrads displacement_cost_grads(const LagrangianSpec& L, std::span<const double> x,
                                  std::span<const double> y, std::span<const double> phi,
                                  EnergyQuadrature q) {
  int d = static_cast<int>(x.size());
  int n = static_cast<int>(phi.size()) / std::max(d, 1) + 2;
  bool learned = L.has_learned_metric();
  EnergyTape et = build_energy_tape(L, x, y, phi, n, q, learned);
  std::vector<Tensor> inputs =
      et.make_inputs(x, y, phi, learned ? &L.metric.rotation_net.params : nullptr);
  std::vector<Tape::NodeId> wrt{et.x_in, et.y_in};
  if (learned) wrt.push_back(et.params_in);
  auto grads = et.tape.gradient(inputs, wrt);
  CostGrads g;
  g.dx = grads[0].values;
  g.dy = grads[1].values;
  if (learned) g.dparams = grads[2];
  return g;
}

// ---------------------------------------------------------------------------
// Predictor training
// ---------------------------------------------------------------------------

double predictor_gradient_step(SplinePredictor& predictor, const LagrangianSpec& L,
                               std::span<const double> xs, std::span<const double> ys, int count,
                               AdamState& opt, EnergyQuadrature q) {
  int d = predictor.dim, n = predictor.knot_count;
  Tape t;
  auto params = t.input(predictor.trunk.params);
  std::vector<double> xy(static_cast<size_t>(count) * 2 * d);
  for (int i = 0; i < count; ++i)
    for (int c = 0; c < d; ++c) {
      xy[static_cast<size_t>(i) * 2 * d + c] = xs[static_cast<size_t>(i) * d + c];
      xy[static_cast<size_t>(i) * 2 * d + d + c] = ys[static_cast<size_t>(i) * d + c];
    }
  auto phi_mat = predictor.apply(t, t.constant(Tensor::matrix(count, 2 * d, xy)), params);

  auto times = quadrature_times(q.nodes);
  SplineBasis basis = spline_basis(n, times);
  auto P = t.constant(Tensor::matrix(q.nodes, n, basis.pos_weights));
  auto V = t.constant(Tensor::matrix(q.nodes, n, basis.vel_weights));

  std::vector<Tape::NodeId> energies;
  energies.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto xi = t.constant(Tensor::vector(
        {xs.begin() + static_cast<long>(i) * d, xs.begin() + static_cast<long>(i + 1) * d}));
    auto yi = t.constant(Tensor::vector(
        {ys.begin() + static_cast<long>(i) * d, ys.begin() + static_cast<long>(i + 1) * d}));
    auto phi_i = t.slice(phi_mat, i * (n - 2) * d, (n - 2) * d);
    auto knots = t.concat({xi, phi_i, yi}, {n, d});
    energies.push_back(append_mean_lagrangian(t, L, t.matmul(P, knots), t.matmul(V, knots),
                                              q.nodes));
  }
  auto mean = t.scale(t.sum(t.concat(energies)), 1.0 / static_cast<double>(count));
  t.set_output(mean);
  double value = t.scalar_value(mean);

  std::vector<Tape::NodeId> wrt{params};
  auto grads = t.gradient(wrt);
  adam_step_inplace(opt, predictor.trunk.params, grads[0]);
  return value;
}

PredictorTrainStats train_spline_predictor(SplinePredictor& predictor, const LagrangianSpec& L,
                                           const PairSampler& sample_pair,
                                           const PredictorTrainConfig& cfg, AdamState* opt) {
  PredictorTrainStats stats;
  if (cfg.steps <= 0) return stats;
  int d = predictor.dim, B = cfg.batch;
  AdamState local = AdamState::create(predictor.trunk.params.numel(),
                                      CosineSchedule::constant(cfg.rate));
  AdamState& state = opt ? *opt : local;

  std::vector<double> xs(static_cast<size_t>(B) * d), ys(static_cast<size_t>(B) * d);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < B; ++i)
      sample_pair({xs.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)},
                  {ys.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)});
    stats.mean_energy.push_back(
        predictor_gradient_step(predictor, L, xs, ys, B, state, cfg.quadrature));
  }
  return stats;
}

double mean_predicted_energy(const SplinePredictor& predictor, const LagrangianSpec& L,
                             std::span<const double> xs, std::span<const double> ys, int count,
                             EnergyQuadrature q) {
  int d = predictor.dim;
  double acc = 0.0;
  for (int i = 0; i < count; ++i) {
    auto res = displacement_cost(
        L, {xs.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)},
        {ys.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)}, predictor, 0, 0.0, q);
    acc += res.cost;
  }
  return acc / static_cast<double>(count);
}

}  // namespace lagot
