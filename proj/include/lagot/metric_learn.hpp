#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lagot/nlot.hpp"

namespace lagot {

// ---------------------------------------------------------------------------
// Min-max metric learning over a measure sequence: an outer Adam descent on
// the rotation-net parameters against K-1 inner Algorithm-1 instances, one
// per consecutive pair.
// ---------------------------------------------------------------------------

struct MetricLearnConfig {
  NlotConfig inner;  // per-pair settings; inner.seed + i seeds pair i
  std::vector<int> rotation_hidden{64, 64, 64, 64};
  double metric_rate = 5e-3;
  double metric_rate_end = 5e-3;  // cosine-interpolated over the outer steps
  int metric_batch = 0;           // 0: use inner.batch
  int inner_updates_per_outer = 10;  // 1 metric update per 10 inner updates
  int outer_steps = 100;
  uint64_t seed = 0;
};

struct MetricLearnState {
  MetricLearnConfig config;
  Mlp rotation_net;
  AdamState rot_opt;
  std::vector<NlotState> inner;  // one per pair (rho_i, rho_{i+1})
  int outer_step = 0;
  Rng rng{0};  // batches for the metric gradient

  static MetricLearnState create(const MetricLearnConfig& cfg, int pair_count);

  // Lagrangian induced by the current rotation parameters (snapshot).
  LagrangianSpec lagrangian() const;
};

// Envelope gradient contribution of pair i: conjugate points and spline
// parameters are solved under the current metric and frozen; only the
// explicit dependence of the path energies on the rotation parameters is
// differentiated. Returns d(mean path energy)/d(theta).
Tensor metric_grad(const MetricLearnState& state, int pair_index,
                   std::span<const double> batch_x, int nx);

struct MetricTrainLogEntry {
  int outer_step = 0;
  double mean_dual_loss = 0.0;
  double mean_path_energy = 0.0;
  std::vector<double> pair_dual_losses;
};

struct MetricTrainHooks {
  int log_interval = 0;
  std::function<void(const MetricTrainLogEntry&)> on_log;
  int checkpoint_interval = 0;
  std::function<void(const MetricLearnState&)> on_checkpoint;
};

MetricLearnState train_metric(const std::vector<EmpiricalMeasure>& measures,
                              const MetricLearnConfig& cfg, const MetricTrainHooks& hooks = {});
void train_metric_loop(MetricLearnState& state, const std::vector<EmpiricalMeasure>& measures,
                       const MetricTrainHooks& hooks = {});

// Mean absolute inner product of eigenvalue-matched unit eigenvectors over a
// grid (flattened [x, y] pairs). Grid points where either metric is within
// 1e-9 of isotropic are skipped, the pairing being undefined there.
double alignment_score(const MetricField& a, const MetricField& a_hat,
                       std::span<const double> grid_points);

void save_metric_state(const MetricLearnState& state, const std::string& prefix);
MetricLearnState load_metric_state(const std::string& prefix, const MetricLearnConfig& cfg,
                                   int pair_count);

}  // namespace lagot
