#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lagot/bench.hpp"
#include "lagot/geodesic.hpp"
#include "lagot/lagrangian.hpp"
#include "lagot/nn.hpp"
#include "lagot/rng.hpp"

namespace lagot {

// ---------------------------------------------------------------------------
// Dual training of the Kantorovich potential with an amortized c-transform
// and amortized spline paths.
// ---------------------------------------------------------------------------

struct NlotConfig {
  int dim = 2;
  std::vector<int> g_hidden{64, 64, 64, 64};
  std::vector<int> y_hidden{64, 64, 64, 64};
  std::vector<int> predictor_hidden{1024, 1024};
  int knots = 30;
  int quad = 100;
  int batch = 1024;
  LbfgsConfig lbfgs{};  // 20 iterations, backtracking Armijo
  double g_rate_start = 1e-4, g_rate_end = 1e-2;
  double y_rate_start = 1e-4, y_rate_end = 1e-2;
  double predictor_rate = 1e-4;
  double leaky_slope = 0.01;
  int steps = 2000;
  uint64_t seed = 0;
};

struct NlotState {
  NlotConfig config;
  Mlp g;                      // Kantorovich potential, scalar output
  Mlp y_net;                  // c-transform predictor trunk; prediction is x + trunk(x)
  SplinePredictor predictor;  // amortized spline parameters
  AdamState g_opt, y_opt, pred_opt;
  int step = 0;
  Rng rng{0};

  static NlotState create(const NlotConfig& cfg);

  // Amortized conjugate point y_zeta(x) = x + trunk(x).
  std::vector<double> warm_start(std::span<const double> x) const;
  double g_value(std::span<const double> y) const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct CtransformResult {
  std::vector<double> y_hat;
  double j_value = 0.0;  // c(x, y_hat) - g(y_hat)
  double cost = 0.0;     // c(x, y_hat)
  int iterations = 0;
  bool line_search_failed = false;
};

// Minimizes J(y; x) = c(x, y) - g(y) with L-BFGS warm-started at y_zeta(x).
// c uses the amortized spline (predictor-only mode); its y-gradient is the
// envelope partial at the predicted (frozen) spline parameters.
CtransformResult c_transform_solve(const NlotState& state, const LagrangianSpec& L,
                                   std::span<const double> x);

struct DualBatch {
  double dual_loss = 0.0;   // (1/N) sum J(y_hat_i; x_i) + (1/M) sum g(y_j)
  Tensor grad_theta;        // gradient of mean g(y_hat) - mean g(y): descending it ascends the dual
  std::vector<double> y_hats;  // [N x d]
  std::vector<double> costs, j_values;
  double mean_conjugate_residual = 0.0;  // mean |y_hat - y_zeta(x)|
  int line_search_failures = 0;
};

DualBatch dual_loss_and_grads(const NlotState& state, const LagrangianSpec& L,
                              std::span<const double> batch_x, int nx,
                              std::span<const double> batch_y, int ny);

struct TrainLogEntry {
  int step = 0;
  double dual_loss = 0.0;
  double mean_conjugate_residual = 0.0;
  double mean_path_energy = 0.0;
};

// One Algorithm-1 iteration: sample-free (batches supplied), updates theta,
// then zeta, then eta.
TrainLogEntry nlot_train_step(NlotState& state, const LagrangianSpec& L,
                              std::span<const double> batch_x, int nx,
                              std::span<const double> batch_y, int ny);

// Draws a batch of rows (with replacement) from a measure, flattened.
std::vector<double> sample_batch(Rng& rng, const EmpiricalMeasure& m, int count);

struct TrainHooks {
  int log_interval = 0;
  std::function<void(const TrainLogEntry&)> on_log;
  int checkpoint_interval = 0;
  std::function<void(const NlotState&)> on_checkpoint;
};

NlotState train_nlot(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const LagrangianSpec& L, const NlotConfig& cfg,
                     const TrainHooks& hooks = {});

// Continues training an existing state up to cfg.steps.
void train_nlot_loop(NlotState& state, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const LagrangianSpec& L, const TrainHooks& hooks = {});

EmpiricalMeasure push_forward(const NlotState& state, const LagrangianSpec& L,
                              const EmpiricalMeasure& samples);

// Tensor-format checkpoint (prefix.manifest.txt / prefix.bin) plus
// prefix.state.json with step counters and the RNG stream.
void save_nlot_state(const NlotState& state, const std::string& prefix);
NlotState load_nlot_state(const std::string& prefix, const NlotConfig& cfg);

}  // namespace lagot
