#include "lagot/metric_learn.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "lagot/parallel.hpp"

namespace lagot {

namespace {

using json = nlohmann::json;

std::vector<int> rotation_sizes(const std::vector<int>& hidden) {
  std::vector<int> sizes{2};
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(1);
  return sizes;
}

}  // namespace

MetricLearnState MetricLearnState::create(const MetricLearnConfig& cfg, int pair_count) {
  if (pair_count < 1)
    throw std::invalid_argument("metric learning needs at least two measures");
  MetricLearnState s;
  s.config = cfg;
  s.rng = Rng(cfg.seed);
  Rng net_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  s.rotation_net = Mlp::create(rotation_sizes(cfg.rotation_hidden), net_rng,
                               cfg.inner.leaky_slope);
  s.rot_opt = AdamState::create(s.rotation_net.params.numel(),
                                {cfg.metric_rate, cfg.metric_rate_end, cfg.outer_steps});
  s.inner.reserve(static_cast<size_t>(pair_count));
  for (int i = 0; i < pair_count; ++i) {
    NlotConfig pc = cfg.inner;
    pc.seed = cfg.inner.seed + static_cast<uint64_t>(i);
    pc.steps = 0;  // the outer loop drives the step count
    s.inner.push_back(NlotState::create(pc));
  }
  return s;
}

LagrangianSpec MetricLearnState::lagrangian() const {
  return LagrangianSpec::with_metric(MetricField::learned(rotation_net));
}

Tensor metric_grad(const MetricLearnState& state, int pair_index,
                   std::span<const double> batch_x, int nx) {
  if (pair_index < 0 || pair_index >= static_cast<int>(state.inner.size()))
    throw std::invalid_argument("metric_grad: pair index out of range");
  const NlotState& inner = state.inner[static_cast<size_t>(pair_index)];
  const int d = inner.config.dim;
  const int n = inner.config.knots;
  const int Q = inner.config.quad;
  LagrangianSpec L = state.lagrangian();

  // solve and freeze the conjugate points and their predicted splines
  std::vector<double> y_hats(static_cast<size_t>(nx) * d);
  parallel_for(nx, [&](int i) {
    std::span<const double> x{batch_x.data() + static_cast<size_t>(i) * d,
                              static_cast<size_t>(d)};
    auto res = c_transform_solve(inner, L, x);
    for (int c = 0; c < d; ++c) y_hats[static_cast<size_t>(i) * d + c] = res.y_hat[static_cast<size_t>(c)];
  });

  // all quadrature nodes of all frozen paths, stacked; only the rotation-net
  // parameters remain differentiable
  auto times = quadrature_times(Q);
  SplineBasis basis = spline_basis(n, times);
  std::vector<double> pos(static_cast<size_t>(nx) * Q * d), vel(pos.size());
  for (int i = 0; i < nx; ++i) {
    std::span<const double> x{batch_x.data() + static_cast<size_t>(i) * d,
                              static_cast<size_t>(d)};
    std::span<const double> y{y_hats.data() + static_cast<size_t>(i) * d,
                              static_cast<size_t>(d)};
    auto phi = inner.predictor.predict_phi(x, y);
    auto s = build_spline(x, y, phi, n);
    for (int q = 0; q < Q; ++q)
      for (int c = 0; c < d; ++c) {
        double pw = 0.0, vw = 0.0;
        for (int j = 0; j < n; ++j) {
          pw += basis.pos_weights[static_cast<size_t>(q) * n + j] * s.knots[static_cast<size_t>(j) * d + c];
          vw += basis.vel_weights[static_cast<size_t>(q) * n + j] * s.knots[static_cast<size_t>(j) * d + c];
        }
        pos[(static_cast<size_t>(i) * Q + q) * d + c] = pw;
        vel[(static_cast<size_t>(i) * Q + q) * d + c] = vw;
      }
  }

  Tape t;
  auto params = t.input(state.rotation_net.params);
  int rows = nx * Q;
  auto e = append_mean_lagrangian(t, L, t.constant(Tensor::matrix(rows, d, pos)),
                                  t.constant(Tensor::matrix(rows, d, vel)), rows, params);
  t.set_output(e);
  std::vector<Tape::NodeId> wrt{params};
  return t.gradient(wrt)[0];
}

void train_metric_loop(MetricLearnState& state, const std::vector<EmpiricalMeasure>& measures,
                       const MetricTrainHooks& hooks) {
  const MetricLearnConfig& cfg = state.config;
  int pairs = static_cast<int>(state.inner.size());
  if (static_cast<int>(measures.size()) != pairs + 1)
    throw std::invalid_argument("measure count does not match the pair count");

  while (state.outer_step < cfg.outer_steps) {
    LagrangianSpec L = state.lagrangian();  // frozen snapshot for this round

    MetricTrainLogEntry entry;
    entry.pair_dual_losses.assign(static_cast<size_t>(pairs), 0.0);
    for (int t = 0; t < cfg.inner_updates_per_outer; ++t) {
      for (int i = 0; i < pairs; ++i) {
        NlotState& inner = state.inner[static_cast<size_t>(i)];
        auto bx = sample_batch(inner.rng, measures[static_cast<size_t>(i)], inner.config.batch);
        auto by = sample_batch(inner.rng, measures[static_cast<size_t>(i) + 1], inner.config.batch);
        auto log = nlot_train_step(inner, L, bx, inner.config.batch, by, inner.config.batch);
        entry.pair_dual_losses[static_cast<size_t>(i)] = log.dual_loss;
        entry.mean_path_energy += log.mean_path_energy;
      }
    }
    entry.mean_path_energy /= static_cast<double>(pairs * cfg.inner_updates_per_outer);

    // averaged envelope gradient across the pairs, then one metric step
    int mbatch = cfg.metric_batch > 0 ? cfg.metric_batch : cfg.inner.batch;
    Tensor grad = Tensor::zeros({state.rotation_net.params.numel()});
    for (int i = 0; i < pairs; ++i) {
      auto bx = sample_batch(state.rng, measures[static_cast<size_t>(i)], mbatch);
      Tensor gi = metric_grad(state, i, bx, mbatch);
      for (int k = 0; k < grad.numel(); ++k)
        grad.values[static_cast<size_t>(k)] += gi.values[static_cast<size_t>(k)];
    }
    for (double& v : grad.values) v /= static_cast<double>(pairs);
    adam_step_inplace(state.rot_opt, state.rotation_net.params, grad);

    state.outer_step += 1;
    entry.outer_step = state.outer_step;
    for (double v : entry.pair_dual_losses) entry.mean_dual_loss += v;
    entry.mean_dual_loss /= pairs;
    if (hooks.on_log && hooks.log_interval > 0 &&
        (state.outer_step % hooks.log_interval == 0 || state.outer_step == cfg.outer_steps))
      hooks.on_log(entry);
    if (hooks.on_checkpoint && hooks.checkpoint_interval > 0 &&
        (state.outer_step % hooks.checkpoint_interval == 0 ||
         state.outer_step == cfg.outer_steps))
      hooks.on_checkpoint(state);
  }
}

MetricLearnState train_metric(const std::vector<EmpiricalMeasure>& measures,
                              const MetricLearnConfig& cfg, const MetricTrainHooks& hooks) {
  if (measures.size() < 2)
    throw std::invalid_argument("metric learning needs at least two measures");
  MetricLearnState state = MetricLearnState::create(cfg, static_cast<int>(measures.size()) - 1);
  train_metric_loop(state, measures, hooks);
  return state;
}

double alignment_score(const MetricField& a, const MetricField& a_hat,
                       std::span<const double> grid_points) {
  if (grid_points.size() % 2 != 0)
    throw std::invalid_argument("alignment grid must be a flat list of 2-d points");
  int total = static_cast<int>(grid_points.size() / 2);
  double acc = 0.0;
  int counted = 0;
  for (int i = 0; i < total; ++i) {
    std::span<const double> x{grid_points.data() + static_cast<size_t>(i) * 2, 2};
    auto ea = eigen_sym2(metric_value(a, x));
    auto eb = eigen_sym2(metric_value(a_hat, x));
    if (std::abs(ea.values[1] - ea.values[0]) < 1e-9 ||
        std::abs(eb.values[1] - eb.values[0]) < 1e-9)
      continue;  // eigenvector pairing undefined at isotropic points
    acc += std::abs(ea.vec1[0] * eb.vec1[0] + ea.vec1[1] * eb.vec1[1]);
    acc += std::abs(ea.vec2[0] * eb.vec2[0] + ea.vec2[1] * eb.vec2[1]);
    counted += 1;
  }
  if (counted == 0) throw std::invalid_argument("alignment grid has no usable points");
  return acc / (2.0 * counted);
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

void save_metric_state(const MetricLearnState& state, const std::string& prefix) {
  save_checkpoint(prefix + ".rotation", {
                                            {"rotation.params", &state.rotation_net.params},
                                            {"rotation.adam.m", &state.rot_opt.m},
                                            {"rotation.adam.v", &state.rot_opt.v},
                                        });
  for (size_t i = 0; i < state.inner.size(); ++i)
    save_nlot_state(state.inner[i], prefix + ".pair" + std::to_string(i));
  json meta{{"outer_step", state.outer_step},
            {"rot_adam_t", state.rot_opt.t},
            {"rng", state.rng.state()},
            {"pairs", state.inner.size()}};
  std::ofstream os(prefix + ".state.json");
  os << meta.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write metric state at " + prefix);
}

MetricLearnState load_metric_state(const std::string& prefix, const MetricLearnConfig& cfg,
                                   int pair_count) {
  MetricLearnState state = MetricLearnState::create(cfg, pair_count);
  auto rot = load_checkpoint(prefix + ".rotation");
  state.rotation_net.params = rot.at("rotation.params");
  state.rot_opt.m = rot.at("rotation.adam.m");
  state.rot_opt.v = rot.at("rotation.adam.v");
  for (int i = 0; i < pair_count; ++i) {
    NlotConfig pc = cfg.inner;
    pc.seed = cfg.inner.seed + static_cast<uint64_t>(i);
    pc.steps = 0;
    state.inner[static_cast<size_t>(i)] =
        load_nlot_state(prefix + ".pair" + std::to_string(i), pc);
  }
  std::ifstream is(prefix + ".state.json");
  if (!is) throw std::runtime_error("missing metric state file at " + prefix);
  json meta = json::parse(is);
  state.outer_step = meta.at("outer_step").get<int>();
  state.rot_opt.t = meta.at("rot_adam_t").get<int>();
  state.rng.set_state(meta.at("rng").get<std::string>());
  return state;
}

}  // namespace lagot
