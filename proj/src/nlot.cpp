#include "lagot/nlot.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "lagot/parallel.hpp"

namespace lagot {

namespace {

using json = nlohmann::json;

std::vector<int> with_io(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(out);
  return sizes;
}

}  // namespace

NlotState NlotState::create(const NlotConfig& cfg) {
  NlotState s;
  s.config = cfg;
  s.rng = Rng(cfg.seed);
  s.g = Mlp::create(with_io(cfg.dim, cfg.g_hidden, 1), s.rng, cfg.leaky_slope);
  // zero head: y_zeta starts as the identity map
  s.y_net = Mlp::create(with_io(cfg.dim, cfg.y_hidden, cfg.dim), s.rng, cfg.leaky_slope, 0.0);
  s.predictor = SplinePredictor::create(cfg.knots, cfg.dim, cfg.predictor_hidden, s.rng);
  s.g_opt = AdamState::create(s.g.params.numel(),
                              {cfg.g_rate_start, cfg.g_rate_end, cfg.steps});
  s.y_opt = AdamState::create(s.y_net.params.numel(),
                              {cfg.y_rate_start, cfg.y_rate_end, cfg.steps});
  s.pred_opt = AdamState::create(s.predictor.trunk.params.numel(),
                                 CosineSchedule::constant(cfg.predictor_rate));
  return s;
}

std::vector<double> NlotState::warm_start(std::span<const double> x) const {
  auto y = y_net.eval(x);
  for (size_t c = 0; c < y.size(); ++c) y[c] += x[c];
  return y;
}

double NlotState::g_value(std::span<const double> y) const { return g.eval(y)[0]; }

// ---------------------------------------------------------------------------
// c-transform
// ---------------------------------------------------------------------------

CtransformResult c_transform_solve(const NlotState& state, const LagrangianSpec& L,
                                   std::span<const double> x) {
  const int d = state.config.dim;
  std::vector<double> warm = state.warm_start(x);

  // one energy tape and one potential tape, replayed across iterations
  std::vector<double> phi0 = state.predictor.predict_phi(x, warm);
  EnergyTape et = build_energy_tape(L, x, warm, phi0, state.config.knots,
                                    {state.config.quad}, false);
  Tape gt;
  auto y_in = gt.input(Tensor::matrix(1, d, {warm.begin(), warm.end()}));
  auto g_out = state.g.apply_constant_params(gt, y_in);
  gt.set_output(gt.sum(g_out));

  Tape::Workspace ews, gws;
  std::vector<Tensor> einputs = et.make_inputs(x, warm, phi0);
  std::vector<Tensor> ginputs{Tensor::matrix(1, d, {warm.begin(), warm.end()})};
  std::vector<Tape::NodeId> e_wrt{et.y_in}, g_wrt{y_in};

  GradObjective objective = [&](std::span<const double> y, std::span<double> grad) {
    std::vector<double> phi = state.predictor.predict_phi(x, y);
    einputs[1].values.assign(y.begin(), y.end());
    einputs[2].values.assign(phi.begin(), phi.end());
    ginputs[0].values.assign(y.begin(), y.end());
    auto de = et.tape.gradient(einputs, e_wrt, ews);
    double energy = ews.vals[static_cast<size_t>(et.energy)].values[0];
    auto dg = gt.gradient(ginputs, g_wrt, gws);
    double gval = gws.vals[static_cast<size_t>(gt.output())].values[0];
    for (int c = 0; c < d; ++c)
      grad[static_cast<size_t>(c)] = de[0].values[static_cast<size_t>(c)] -
                                     dg[0].values[static_cast<size_t>(c)];
    return energy - gval;
  };

  auto res = lbfgs_minimize(objective, warm, state.config.lbfgs);

  CtransformResult out;
  out.y_hat = res.point;
  out.j_value = res.value;
  out.iterations = res.iterations;
  out.line_search_failed = res.line_search_failed;
  out.cost = res.value + state.g_value(res.point);
  return out;
}

// ---------------------------------------------------------------------------
// Dual loss and Danskin gradient
// ---------------------------------------------------------------------------

DualBatch dual_loss_and_grads(const NlotState& state, const LagrangianSpec& L,
                              std::span<const double> batch_x, int nx,
                              std::span<const double> batch_y, int ny) {
  const int d = state.config.dim;
  DualBatch out;
  out.y_hats.resize(static_cast<size_t>(nx) * d);
  out.costs.resize(static_cast<size_t>(nx));
  out.j_values.resize(static_cast<size_t>(nx));
  std::vector<double> residuals(static_cast<size_t>(nx));
  std::vector<int> failures(static_cast<size_t>(nx), 0);

  parallel_for(nx, [&](int i) {
    std::span<const double> x{batch_x.data() + static_cast<size_t>(i) * d,
                              static_cast<size_t>(d)};
    auto res = c_transform_solve(state, L, x);
    for (int c = 0; c < d; ++c) out.y_hats[static_cast<size_t>(i) * d + c] = res.y_hat[static_cast<size_t>(c)];
    out.costs[static_cast<size_t>(i)] = res.cost;
    out.j_values[static_cast<size_t>(i)] = res.j_value;
    failures[static_cast<size_t>(i)] = res.line_search_failed ? 1 : 0;
    auto warm = state.warm_start(x);
    double r = 0.0;
    for (int c = 0; c < d; ++c) {
      double dv = res.y_hat[static_cast<size_t>(c)] - warm[static_cast<size_t>(c)];
      r += dv * dv;
    }
    residuals[static_cast<size_t>(i)] = std::sqrt(r);
  });

  double j_mean = 0.0;
  for (int i = 0; i < nx; ++i) {
    if (!std::isfinite(out.j_values[static_cast<size_t>(i)]))
      throw std::runtime_error("dual loss is not finite at batch sample " + std::to_string(i));
    j_mean += out.j_values[static_cast<size_t>(i)];
    out.mean_conjugate_residual += residuals[static_cast<size_t>(i)];
    out.line_search_failures += failures[static_cast<size_t>(i)];
  }
  j_mean /= nx;
  out.mean_conjugate_residual /= nx;

  // descent objective for theta: mean g(y_hat) - mean g(y)
  Tape t;
  auto params = t.input(state.g.params);
  auto g_hat = state.g.apply(t, t.constant(Tensor::matrix(nx, d, out.y_hats)), params);
  auto g_tgt = state.g.apply(
      t, t.constant(Tensor::matrix(ny, d, {batch_y.begin(), batch_y.end()})), params);
  auto obj = t.add(t.scale(t.sum(g_hat), 1.0 / nx), t.scale(t.sum(g_tgt), -1.0 / ny));
  t.set_output(obj);
  std::vector<Tape::NodeId> wrt{params};
  out.grad_theta = t.gradient(wrt)[0];

  double mean_g_tgt = 0.0;
  for (double v : t.value(g_tgt).values) mean_g_tgt += v;
  mean_g_tgt /= ny;
  out.dual_loss = j_mean + mean_g_tgt;
  return out;
}

// ---------------------------------------------------------------------------
// One Algorithm-1 iteration: theta, then zeta, then eta
// ---------------------------------------------------------------------------

TrainLogEntry nlot_train_step(NlotState& state, const LagrangianSpec& L,
                              std::span<const double> batch_x, int nx,
                              std::span<const double> batch_y, int ny) {
  const int d = state.config.dim;
  DualBatch db = dual_loss_and_grads(state, L, batch_x, nx, batch_y, ny);

  // theta ascends the dual
  adam_step_inplace(state.g_opt, state.g.params, db.grad_theta);

  // zeta regresses onto the fine-tuned conjugate points (unsquared norm;
  // samples with negligible residual are skipped, the gradient is undefined
  // there)
  std::vector<double> sel_x, sel_y;
  int selected = 0;
  for (int i = 0; i < nx; ++i) {
    std::span<const double> x{batch_x.data() + static_cast<size_t>(i) * d,
                              static_cast<size_t>(d)};
    auto warm = state.warm_start(x);
    double r = 0.0;
    for (int c = 0; c < d; ++c) {
      double dv = db.y_hats[static_cast<size_t>(i) * d + c] - warm[static_cast<size_t>(c)];
      r += dv * dv;
    }
    if (std::sqrt(r) < 1e-9) continue;
    sel_x.insert(sel_x.end(), x.begin(), x.end());
    for (int c = 0; c < d; ++c) sel_y.push_back(db.y_hats[static_cast<size_t>(i) * d + c]);
    ++selected;
  }
  if (selected > 0) {
    Tape t;
    auto params = t.input(state.y_net.params);
    auto X = t.constant(Tensor::matrix(selected, d, sel_x));
    auto pred = t.add(state.y_net.apply(t, X, params), X);  // identity skip
    auto diff = t.sub(t.constant(Tensor::matrix(selected, d, sel_y)), pred);
    auto sq = t.elementwise(diff, Nonlin::Square);
    auto row = t.matmul(sq, t.constant(Tensor::vector(std::vector<double>(d, 1.0))));
    auto norms = t.elementwise(row, Nonlin::Sqrt);
    t.set_output(t.scale(t.sum(norms), 1.0 / selected));
    std::vector<Tape::NodeId> wrt{params};
    auto grads = t.gradient(wrt);
    adam_step_inplace(state.y_opt, state.y_net.params, grads[0]);
  }

  // eta descends the mean path energy of the predicted splines
  double mean_energy = predictor_gradient_step(state.predictor, L, batch_x, db.y_hats, nx,
                                               state.pred_opt, {state.config.quad});

  state.step += 1;
  TrainLogEntry log;
  log.step = state.step;
  log.dual_loss = db.dual_loss;
  log.mean_conjugate_residual = db.mean_conjugate_residual;
  log.mean_path_energy = mean_energy;
  return log;
}

std::vector<double> sample_batch(Rng& rng, const EmpiricalMeasure& m, int count) {
  std::vector<double> out(static_cast<size_t>(count) * m.dim);
  for (int i = 0; i < count; ++i) {
    auto p = m.point(rng.uniform_int(m.size()));
    for (int c = 0; c < m.dim; ++c) out[static_cast<size_t>(i) * m.dim + c] = p[static_cast<size_t>(c)];
  }
  return out;
}

void train_nlot_loop(NlotState& state, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const LagrangianSpec& L, const TrainHooks& hooks) {
  const NlotConfig& cfg = state.config;
  if (mu.size() == 0 || nu.size() == 0) throw std::invalid_argument("training measures are empty");
  while (state.step < cfg.steps) {
    auto bx = sample_batch(state.rng, mu, cfg.batch);
    auto by = sample_batch(state.rng, nu, cfg.batch);
    auto entry = nlot_train_step(state, L, bx, cfg.batch, by, cfg.batch);
    if (hooks.on_log && hooks.log_interval > 0 &&
        (state.step % hooks.log_interval == 0 || state.step == cfg.steps))
      hooks.on_log(entry);
    if (hooks.on_checkpoint && hooks.checkpoint_interval > 0 &&
        (state.step % hooks.checkpoint_interval == 0 || state.step == cfg.steps))
      hooks.on_checkpoint(state);
  }
}

NlotState train_nlot(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const LagrangianSpec& L, const NlotConfig& cfg, const TrainHooks& hooks) {
  NlotState state = NlotState::create(cfg);
  train_nlot_loop(state, mu, nu, L, hooks);
  return state;
}

EmpiricalMeasure push_forward(const NlotState& state, const LagrangianSpec& L,
                              const EmpiricalMeasure& samples) {
  EmpiricalMeasure out;
  out.dim = samples.dim;
  out.points.resize(samples.points.size());
  parallel_for(samples.size(), [&](int i) {
    auto res = c_transform_solve(state, L, samples.point(i));
    for (int c = 0; c < samples.dim; ++c)
      out.points[static_cast<size_t>(i) * samples.dim + c] = res.y_hat[static_cast<size_t>(c)];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

void save_nlot_state(const NlotState& state, const std::string& prefix) {
  save_checkpoint(prefix, {
                              {"g.params", &state.g.params},
                              {"y.params", &state.y_net.params},
                              {"predictor.params", &state.predictor.trunk.params},
                              {"g.adam.m", &state.g_opt.m},
                              {"g.adam.v", &state.g_opt.v},
                              {"y.adam.m", &state.y_opt.m},
                              {"y.adam.v", &state.y_opt.v},
                              {"predictor.adam.m", &state.pred_opt.m},
                              {"predictor.adam.v", &state.pred_opt.v},
                          });
  json meta{{"step", state.step},
            {"g_adam_t", state.g_opt.t},
            {"y_adam_t", state.y_opt.t},
            {"predictor_adam_t", state.pred_opt.t},
            {"rng", state.rng.state()}};
  std::ofstream os(prefix + ".state.json");
  os << meta.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write state file at " + prefix);
}

NlotState load_nlot_state(const std::string& prefix, const NlotConfig& cfg) {
  NlotState state = NlotState::create(cfg);
  auto tensors = load_checkpoint(prefix);
  auto take = [&](const char* name) -> Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint at " + prefix + " is missing tensor " + name);
    return it->second;
  };
  state.g.params = take("g.params");
  state.y_net.params = take("y.params");
  state.predictor.trunk.params = take("predictor.params");
  state.g_opt.m = take("g.adam.m");
  state.g_opt.v = take("g.adam.v");
  state.y_opt.m = take("y.adam.m");
  state.y_opt.v = take("y.adam.v");
  state.pred_opt.m = take("predictor.adam.m");
  state.pred_opt.v = take("predictor.adam.v");

  std::ifstream is(prefix + ".state.json");
  if (!is) throw std::runtime_error("missing state file at " + prefix);
  json meta = json::parse(is);
  state.step = meta.at("step").get<int>();
  state.g_opt.t = meta.at("g_adam_t").get<int>();
  state.y_opt.t = meta.at("y_adam_t").get<int>();
  state.pred_opt.t = meta.at("predictor_adam_t").get<int>();
  state.rng.set_state(meta.at("rng").get<std::string>());
  return state;
}

}  // namespace lagot
