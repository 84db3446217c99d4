#include "lagot/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace lagot {

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

int Mlp::param_count(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  int n = 0;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

Mlp Mlp::create(std::vector<int> sizes, Rng& rng, double slope, double head_scale) {
  Mlp net;
  net.layer_sizes = std::move(sizes);
  net.leaky_slope = slope;
  net.params = Tensor::zeros({param_count(net.layer_sizes)});
  int off = 0;
  size_t layers = net.layer_sizes.size() - 1;
  for (size_t l = 0; l < layers; ++l) {
    int n_in = net.layer_sizes[l];
    int n_out = net.layer_sizes[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    double s = (l + 1 == layers) ? head_scale : 1.0;
    for (int i = 0; i < n_in * n_out; ++i) net.params[off + i] = s * rng.uniform(-bound, bound);
    off += n_in * n_out;
    off += n_out;  // biases stay zero
  }
  return net;
}

std::vector<double> Mlp::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in_dim())
    throw std::invalid_argument("mlp eval: input has dimension " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(in_dim()));
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  int off = 0;
  size_t layers = layer_sizes.size() - 1;
  for (size_t l = 0; l < layers; ++l) {
    int n_in = layer_sizes[l];
    int n_out = layer_sizes[l + 1];
    const double* w = params.values.data() + off;
    const double* b = w + n_in * n_out;
    next.assign(static_cast<size_t>(n_out), 0.0);
    for (int i = 0; i < n_in; ++i) {
      double xi = cur[static_cast<size_t>(i)];
      if (xi == 0.0) continue;
      const double* wrow = w + i * n_out;
      for (int j = 0; j < n_out; ++j) next[static_cast<size_t>(j)] += xi * wrow[j];
    }
    for (int j = 0; j < n_out; ++j) next[static_cast<size_t>(j)] += b[j];
    if (l + 1 < layers)
      for (double& v : next)
        if (v < 0.0) v *= leaky_slope;
    cur.swap(next);
    off += n_in * n_out + n_out;
  }
  return cur;
}

Tape::NodeId Mlp::apply(Tape& t, Tape::NodeId X, Tape::NodeId params_node) const {
  const auto& xs = t.shape(X);
  if (xs.size() != 2 || xs[1] != in_dim())
    throw std::invalid_argument("mlp apply: X must be [N x " + std::to_string(in_dim()) + "]");
  int n_rows = xs[0];
  Tape::NodeId ones = t.constant(Tensor::matrix(n_rows, 1, std::vector<double>(n_rows, 1.0)));
  Tape::NodeId h = X;
  int off = 0;
  size_t layers = layer_sizes.size() - 1;
  for (size_t l = 0; l < layers; ++l) {
    int n_in = layer_sizes[l];
    int n_out = layer_sizes[l + 1];
    Tape::NodeId W = t.slice(params_node, off, n_in * n_out, {n_in, n_out});
    Tape::NodeId b = t.slice(params_node, off + n_in * n_out, n_out, {1, n_out});
    h = t.add(t.matmul(h, W), t.matmul(ones, b));
    if (l + 1 < layers) h = t.elementwise(h, Nonlin::LeakyRelu, leaky_slope);
    off += n_in * n_out + n_out;
  }
  return h;
}

Tape::NodeId Mlp::apply_constant_params(Tape& t, Tape::NodeId X) const {
  return apply(t, X, t.constant(params));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

double CosineSchedule::rate(int t) const {
  if (total_steps <= 0 || start_rate == end_rate) return start_rate;
  double frac = static_cast<double>(std::min(std::max(t, 0), total_steps)) /
                static_cast<double>(total_steps);
  return end_rate + (start_rate - end_rate) * 0.5 * (1.0 + std::cos(M_PI * frac));
}

AdamState AdamState::create(int param_count, CosineSchedule schedule) {
  AdamState s;
  s.m = Tensor::zeros({param_count});
  s.v = Tensor::zeros({param_count});
  s.schedule = schedule;
  return s;
}

void adam_step_inplace(AdamState& s, Tensor& params, const Tensor& grad) {
  if (!params.same_shape(grad) || !params.same_shape(s.m))
    throw std::invalid_argument("adam: parameter/gradient/moment shapes disagree");
  for (size_t i = 0; i < grad.values.size(); ++i)
    if (!std::isfinite(grad.values[i]))
      throw std::runtime_error("adam: non-finite gradient entry at index " + std::to_string(i) +
                               " (step " + std::to_string(s.t) + ")");
  double rate = s.schedule.rate(s.t);
  s.t += 1;
  double b1t = 1.0 - std::pow(s.beta1, s.t);
  double b2t = 1.0 - std::pow(s.beta2, s.t);
  for (size_t i = 0; i < params.values.size(); ++i) {
    double g = grad.values[i];
    s.m.values[i] = s.beta1 * s.m.values[i] + (1.0 - s.beta1) * g;
    s.v.values[i] = s.beta2 * s.v.values[i] + (1.0 - s.beta2) * g * g;
    double mhat = s.m.values[i] / b1t;
    double vhat = s.v.values[i] / b2t;
    params.values[i] -= rate * mhat / (std::sqrt(vhat) + s.eps);
  }
}

std::pair<Tensor, AdamState> adam_step(AdamState state, const Tensor& params,
                                       const Tensor& grad) {
  Tensor p = params;
  adam_step_inplace(state, p, grad);
  return {std::move(p), std::move(state)};
}

// ---------------------------------------------------------------------------
// L-BFGS
// ---------------------------------------------------------------------------

namespace {

double nrm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dotv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

LbfgsResult lbfgs_minimize(const GradObjective& f, std::vector<double> y0,
                           const LbfgsConfig& cfg) {
  const size_t d = y0.size();
  LbfgsResult res;
  std::vector<double> g(d), g_new(d), y_trial(d), dir(d);
  double fy = f(y0, g);
  if (!std::isfinite(fy)) throw std::runtime_error("lbfgs: objective not finite at start point");
  res.value_history.push_back(fy);

  std::vector<double> y = std::move(y0);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  double gnorm = nrm2(g);
  for (int iter = 0; iter < cfg.max_iters && gnorm >= cfg.grad_tol; ++iter) {
    // two-loop recursion: dir = -H g
    dir.assign(g.begin(), g.end());
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * dotv(s_hist[i], dir);
      for (size_t k = 0; k < d; ++k) dir[k] -= alpha[i] * y_hist[i][k];
    }
    if (!s_hist.empty()) {
      double gamma = dotv(s_hist.back(), y_hist.back()) / dotv(y_hist.back(), y_hist.back());
      for (double& v : dir) v *= gamma;
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * dotv(y_hist[i], dir);
      for (size_t k = 0; k < d; ++k) dir[k] += (alpha[i] - beta) * s_hist[i][k];
    }
    for (double& v : dir) v = -v;

    double slope = dotv(g, dir);
    if (slope >= 0.0) {  // not a descent direction, fall back to steepest descent
      for (size_t k = 0; k < d; ++k) dir[k] = -g[k];
      slope = -gnorm * gnorm;
    }

    // backtracking Armijo line search from unit step
    double step = 1.0;
    bool accepted = false;
    double f_trial = fy;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      for (size_t k = 0; k < d; ++k) y_trial[k] = y[k] + step * dir[k];
      f_trial = f(y_trial, g_new);
      if (std::isfinite(f_trial) && f_trial <= fy + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    std::vector<double> s_vec(d), yv(d);
    for (size_t k = 0; k < d; ++k) {
      s_vec[k] = y_trial[k] - y[k];
      yv[k] = g_new[k] - g[k];
    }
    double sy = dotv(s_vec, yv);
    if (sy > 1e-10 * nrm2(s_vec) * nrm2(yv)) {
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    } else {
      // Armijo alone does not enforce the curvature condition; a rejected
      // pair means the stored model is wrong here, so restart it.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    y.swap(y_trial);
    g.swap(g_new);
    fy = f_trial;
    gnorm = nrm2(g);
    res.iterations = iter + 1;
    res.value_history.push_back(fy);
  }

  res.point = std::move(y);
  res.value = fy;
  res.grad_norm = gnorm;
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& prefix,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream manifest(prefix + ".manifest.txt");
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!manifest || !bin)
    throw std::runtime_error("checkpoint: cannot open files at prefix " + prefix);
  for (const auto& [name, t] : tensors) {
    manifest << name;
    for (int d : t->shape) manifest << " " << d;
    manifest << "\n";
    bin.write(reinterpret_cast<const char*>(t->values.data()),
              static_cast<std::streamsize>(t->values.size() * sizeof(double)));
  }
  if (!manifest || !bin) throw std::runtime_error("checkpoint: write failed at prefix " + prefix);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& prefix) {
  std::ifstream manifest(prefix + ".manifest.txt");
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!manifest || !bin)
    throw std::runtime_error("checkpoint: cannot open files at prefix " + prefix);
  std::map<std::string, Tensor> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name;
    is >> name;
    std::vector<int> shape;
    int dim;
    while (is >> dim) shape.push_back(dim);
    Tensor t = Tensor::zeros(shape);
    bin.read(reinterpret_cast<char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("checkpoint: binary payload truncated for tensor " + name);
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace lagot
