#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lagot/autodiff.hpp"
#include "lagot/lagrangian.hpp"
#include "lagot/nn.hpp"
#include "lagot/spline.hpp"

namespace lagot {

// Composite midpoint rule on `nodes` uniform subintervals of [0,1].
struct EnergyQuadrature {
  int nodes = 100;
};

std::vector<double> quadrature_times(int nodes);

// Quadrature approximation of the path action int_0^1 L(gamma_t, gammadot_t) dt,
// evaluated directly from the spline. Errors if L is non-finite at a node.
double path_energy(const LagrangianSpec& L, const PathSpline& s, EnergyQuadrature q = {});

// The same action as a differentiable program: inputs are the endpoints, the
// interior knot values phi and (for a learned metric) the rotation-net
// parameters. The tape is fixed once built and may be replayed with new input
// values, e.g. across the iterations of a c-transform solve.
struct EnergyTape {
  Tape tape;
  Tape::NodeId x_in = -1, y_in = -1, phi_in = -1, params_in = -1;
  Tape::NodeId energy = -1;
  int knot_count = 0, dim = 0, quad_nodes = 0;

  bool has_params() const { return params_in >= 0; }
  std::vector<Tensor> make_inputs(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> phi,
                                  const Tensor* params = nullptr) const;
  double value(std::span<const Tensor> inputs, Tape::Workspace& ws) const;
};

// params_as_input exposes the rotation-net parameters as a tape input; it is
// only meaningful for the learned metric (otherwise ignored).
EnergyTape build_energy_tape(const LagrangianSpec& L, std::span<const double> x,
                             std::span<const double> y, std::span<const double> phi,
                             int knot_count, EnergyQuadrature q = {},
                             bool params_as_input = false);

// ---------------------------------------------------------------------------
// Direct geodesic solve: Adam descent of the action over phi
// ---------------------------------------------------------------------------

struct GeodesicResult {
  PathSpline path;
  double energy = 0.0;
  std::vector<double> phi;
};

GeodesicResult solve_geodesic(const LagrangianSpec& L, std::span<const double> x,
                              std::span<const double> y, std::span<const double> init_phi,
                              int steps = 100, double rate = 1e-2, EnergyQuadrature q = {});

// ---------------------------------------------------------------------------
// Amortized spline prediction
// ---------------------------------------------------------------------------

// Predicts interior knot values for the path between x and y as
// chord(x, y) + trunk([x, y]). The trunk's final layer starts at zero, so an
// untrained predictor emits exactly the straight-line waypoints.
struct SplinePredictor {
  Mlp trunk;  // input 2d, output (n-2)*d
  int knot_count = 0;
  int dim = 0;

  static SplinePredictor create(int knot_count, int dim, std::vector<int> hidden, Rng& rng);

  std::vector<double> predict_phi(std::span<const double> x, std::span<const double> y) const;

  // xy is [N x 2d] (rows are concatenated pairs); returns [N x (n-2)d].
  Tape::NodeId apply(Tape& t, Tape::NodeId xy, Tape::NodeId trunk_params) const;

  Tensor chord_matrix() const;  // [2d x (n-2)d] linear chord map
};

struct DisplacementResult {
  double cost = 0.0;
  std::vector<double> phi;
  PathSpline path;
};

// c(x, y) through the amortized spline, optionally fine-tuned by Adam steps on
// phi (deterministic, best-seen iterate returned).
DisplacementResult displacement_cost(const LagrangianSpec& L, std::span<const double> x,
                                     std::span<const double> y, const SplinePredictor& predictor,
                                     int fine_tune_steps = 0, double fine_tune_rate = 1e-2,
                                     EnergyQuadrature q = {});

// Envelope gradients of the cost: partial derivatives of the action at the
// given (frozen) phi with respect to the endpoints and, for a learned metric,
// the rotation-net parameters.
struct CostGrads {
  std::vector<double> dx, dy;
  Tensor dparams;
};

CostGrads displacement_cost_grads(const LagrangianSpec& L, std::span<const double> x,
                                  std::span<const double> y, std::span<const double> phi,
                                  EnergyQuadrature q = {});

// ---------------------------------------------------------------------------
// Predictor training (objective-based amortization of the action)
// ---------------------------------------------------------------------------

// Draws one endpoint pair into (x, y); endpoints are treated as constants.
using PairSampler = std::function<void(std::span<double> x, std::span<double> y)>;

struct PredictorTrainConfig {
  int steps = 1000;
  int batch = 64;
  double rate = 1e-4;
  EnergyQuadrature quadrature{};
};

struct PredictorTrainStats {
  std::vector<double> mean_energy;  // one entry per step
};

PredictorTrainStats train_spline_predictor(SplinePredictor& predictor, const LagrangianSpec& L,
                                           const PairSampler& sample_pair,
                                           const PredictorTrainConfig& cfg, AdamState* opt = nullptr);

// One Adam step of the amortization objective on the given (constant)
// endpoint pairs; returns the batch mean predicted-path energy before the
// step. For a learned metric the rotation parameters stay frozen.
double predictor_gradient_step(SplinePredictor& predictor, const LagrangianSpec& L,
                               std::span<const double> xs, std::span<const double> ys, int count,
                               AdamState& opt, EnergyQuadrature q = {});

// Mean predicted-path energy over a batch of pairs; the eta-training
// objective, also used for progress checks.
double mean_predicted_energy(const SplinePredictor& predictor, const LagrangianSpec& L,
                             std::span<const double> xs, std::span<const double> ys, int count,
                             EnergyQuadrature q = {});

}  // namespace lagot
