#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lagot/autodiff.hpp"
#include "lagot/rng.hpp"

namespace lagot {

class Rng;

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

// Fully connected network with Leaky-ReLU hidden activations and a linear
// output layer. Parameters live in one flat tensor; layer l stores its weight
// matrix input-major as [n_in x n_out] followed by the bias row, so a batch
// X [N x n_in] maps to matmul(X, W) + b without transposes.
struct Mlp {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Tensor params;
  double leaky_slope = 0.01;

  static int param_count(const std::vector<int>& sizes);

  // Uniform +-1/sqrt(fan_in) weights, zero biases. head_scale multiplies the
  // final layer's weights (0 gives an exactly-zero output at initialization).
  static Mlp create(std::vector<int> sizes, Rng& rng, double slope = 0.01,
                    double head_scale = 1.0);

  int in_dim() const { return layer_sizes.front(); }
  int out_dim() const { return layer_sizes.back(); }

  // Plain evaluation of a single point, no tape.
  std::vector<double> eval(std::span<const double> x) const;

  // Appends the network applied to every row of X [N x in] -> [N x out].
  // params_node may be an input (for parameter gradients) or a constant.
  Tape::NodeId apply(Tape& t, Tape::NodeId X, Tape::NodeId params_node) const;
  Tape::NodeId apply_constant_params(Tape& t, Tape::NodeId X) const;
};

// ---------------------------------------------------------------------------
// Adam with cosine-interpolated learning rate
// ---------------------------------------------------------------------------

struct CosineSchedule {
  double start_rate = 1e-4;
  double end_rate = 1e-4;
  int total_steps = 0;

  static CosineSchedule constant(double rate) { return {rate, rate, 0}; }
  double rate(int t) const;
};

struct AdamState {
  Tensor m, v;
  int t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  CosineSchedule schedule;

  static AdamState create(int param_count, CosineSchedule schedule);
};

// Standard Adam update with bias correction at the schedule's rate for the
// current step. Throws on non-finite gradient entries.
std::pair<Tensor, AdamState> adam_step(AdamState state, const Tensor& params,
                                       const Tensor& grad);
void adam_step_inplace(AdamState& state, Tensor& params, const Tensor& grad);

// ---------------------------------------------------------------------------
// L-BFGS with backtracking Armijo line search
// ---------------------------------------------------------------------------

struct LbfgsConfig {
  int max_iters = 20;
  int history = 10;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double grad_tol = 1e-8;
  int max_backtracks = 30;
};

struct LbfgsResult {
  std::vector<double> point;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool line_search_failed = false;
  std::vector<double> value_history;  // objective at y0 and after each accepted step
};

// f fills grad (same length as y) and returns the objective value.
using GradObjective = std::function<double(std::span<const double> y, std::span<double> grad)>;

LbfgsResult lbfgs_minimize(const GradObjective& f, std::vector<double> y0,
                           const LbfgsConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints: `<prefix>.manifest.txt` (one line per tensor: name then shape)
// plus `<prefix>.bin`, IEEE-754 little-endian doubles in manifest order.
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& prefix,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& prefix);

}  // namespace lagot
