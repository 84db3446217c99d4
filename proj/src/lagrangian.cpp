#include "lagot/lagrangian.hpp"

#include <cmath>
#include <stdexcept>

namespace lagot {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_dim2(std::span<const double> x, const char* what) {
  if (x.size() != 2)
    throw std::invalid_argument(std::string(what) + ": expected a point in R^2, got dimension " +
                                std::to_string(x.size()));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

// x-paths mixing weights; w(x) = alpha w1 + beta w2 with w1 = (1,1)/sqrt2,
// w2 = (1,-1)/sqrt2.
void xpaths_alpha_beta(double x1, double x2, double& alpha, double& beta) {
  double p = x1 * x2;
  alpha = 1.25 * std::tanh(p > 0.0 ? p : 0.0);
  beta = -1.25 * std::tanh(p < 0.0 ? -p : 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

double potential_value(const PotentialSpec& p, std::span<const double> x) {
  check_dim2(x, "potential");
  double k = p.sharpness;
  switch (p.kind) {
    case PotentialSpec::Kind::Box:
      return -p.m1 * sigmoid(k * (x[0] + 0.5)) * sigmoid(k * (0.5 - x[0])) *
             sigmoid(k * (x[1] + 0.5)) * sigmoid(k * (0.5 - x[1]));
    case PotentialSpec::Kind::Slit: {
      double window = sigmoid(k * (x[0] + 0.1)) * sigmoid(k * (0.1 - x[0]));
      double lower = sigmoid(k * (-0.25 - x[1]));
      double upper = sigmoid(k * (x[1] - 0.25));
      return -p.m2 * window * (lower + upper);
    }
    case PotentialSpec::Kind::Hill:
      return -p.m3 * (x[0] * x[0] + x[1] * x[1]);
    case PotentialSpec::Kind::Well:
      return -p.m4 * std::exp(-(x[0] * x[0] + x[1] * x[1]));
    case PotentialSpec::Kind::Gmm: {
      double s = 0.0;
      for (const auto& c : kGmmBallCenters) {
        double r = std::hypot(x[0] - c[0], x[1] - c[1]);
        s += sigmoid(k * (kGmmBallRadius - r));
      }
      return -p.m5 * s;
    }
  }
  throw std::invalid_argument("unknown potential kind");
}

bool inside_hard_obstacle(const PotentialSpec& p, std::span<const double> x) {
  check_dim2(x, "potential");
  switch (p.kind) {
    case PotentialSpec::Kind::Box:
      return std::abs(x[0]) <= 0.5 && std::abs(x[1]) <= 0.5;
    case PotentialSpec::Kind::Slit:
      return std::abs(x[0]) <= 0.1 && (x[1] <= -0.25 || x[1] >= 0.25);
    case PotentialSpec::Kind::Gmm:
      for (const auto& c : kGmmBallCenters)
        if (std::hypot(x[0] - c[0], x[1] - c[1]) <= kGmmBallRadius) return true;
      return false;
    case PotentialSpec::Kind::Hill:
    case PotentialSpec::Kind::Well:
      return false;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Metric fields
// ---------------------------------------------------------------------------

MetricField MetricField::circle(double eps) {
  MetricField m;
  m.kind = Kind::Circle;
  m.eps = eps;
  return m;
}

MetricField MetricField::mass_splitting(double delta) {
  MetricField m;
  m.kind = Kind::MassSplitting;
  m.delta = delta;
  return m;
}

MetricField MetricField::x_paths(double delta) {
  MetricField m;
  m.kind = Kind::XPaths;
  m.delta = delta;
  return m;
}

MetricField MetricField::learned(Mlp rotation_net, std::array<double, 2> b_diag) {
  MetricField m;
  m.kind = Kind::Learned;
  m.rotation_net = std::move(rotation_net);
  m.b_diag = b_diag;
  return m;
}

std::array<double, 4> metric_value(const MetricField& m, std::span<const double> x) {
  check_dim2(x, "metric");
  switch (m.kind) {
    case MetricField::Kind::Circle: {
      double r2 = x[0] * x[0] + x[1] * x[1];
      if (r2 == 0.0)
        throw std::invalid_argument("circle metric is undefined at the origin");
      double a11 = x[0] * x[0] / r2 + m.eps;
      double a12 = x[0] * x[1] / r2;
      double a22 = x[1] * x[1] / r2 + m.eps;
      return {a11, a12, a12, a22};
    }
    case MetricField::Kind::MassSplitting: {
      double s = x[1] >= 0.0 ? 1.0 : -1.0;
      // w = (1, s)/sqrt2, so w w^T = [[0.5, 0.5 s], [0.5 s, 0.5]]
      double a11 = 1.0 + m.delta - 0.5;
      double a12 = -0.5 * s;
      return {a11, a12, a12, a11};
    }
    case MetricField::Kind::XPaths: {
      double alpha, beta;
      xpaths_alpha_beta(x[0], x[1], alpha, beta);
      double w1 = kInvSqrt2 * (alpha + beta);
      double w2 = kInvSqrt2 * (alpha - beta);
      double n2 = alpha * alpha + beta * beta;
      double clamp = n2 > 1.0 ? 1.0 / n2 : 1.0;  // cap |w| at 1 to stay positive definite
      double a11 = 1.0 + m.delta - clamp * w1 * w1;
      double a12 = -clamp * w1 * w2;
      double a22 = 1.0 + m.delta - clamp * w2 * w2;
      return {a11, a12, a12, a22};
    }
    case MetricField::Kind::Learned: {
      double theta = m.rotation_net.eval(x)[0];
      double c = std::cos(theta), s = std::sin(theta);
      double b1 = m.b_diag[0], b2 = m.b_diag[1];
      double a11 = b1 * c * c + b2 * s * s;
      double a12 = (b1 - b2) * c * s;
      double a22 = b1 * s * s + b2 * c * c;
      return {a11, a12, a12, a22};
    }
  }
  throw std::invalid_argument("unknown metric kind");
}

// ---------------------------------------------------------------------------
// Lagrangians
// ---------------------------------------------------------------------------

LagrangianSpec LagrangianSpec::kinetic() {
  LagrangianSpec L;
  L.kind = Kind::Kinetic;
  return L;
}

LagrangianSpec LagrangianSpec::with_potential(PotentialSpec p) {
  LagrangianSpec L;
  L.kind = Kind::KineticMinusPotential;
  L.potential = p;
  return L;
}

LagrangianSpec LagrangianSpec::with_metric(MetricField m) {
  LagrangianSpec L;
  L.kind = Kind::Metric;
  L.metric = std::move(m);
  return L;
}

double lagrangian_value(const LagrangianSpec& L, std::span<const double> x,
                        std::span<const double> v) {
  double vsq = 0.0;
  for (double vi : v) vsq += vi * vi;
  switch (L.kind) {
    case LagrangianSpec::Kind::Kinetic:
      return 0.5 * vsq;
    case LagrangianSpec::Kind::KineticMinusPotential:
      return 0.5 * vsq - potential_value(L.potential, x);
    case LagrangianSpec::Kind::Metric: {
      check_dim2(v, "lagrangian velocity");
      auto a = metric_value(L.metric, x);
      return 0.5 * (a[0] * v[0] * v[0] + 2.0 * a[1] * v[0] * v[1] + a[3] * v[1] * v[1]);
    }
  }
  throw std::invalid_argument("unknown lagrangian kind");
}

// ---------------------------------------------------------------------------
// Tape emission
// ---------------------------------------------------------------------------

namespace {

using NodeId = Tape::NodeId;

// column j of a [rows x 2] node as a [rows] vector
NodeId col2(Tape& t, NodeId mat, int j) {
  return t.matmul(mat, t.constant(Tensor::vector({j == 0 ? 1.0 : 0.0, j == 0 ? 0.0 : 1.0})));
}

NodeId row_sums(Tape& t, NodeId mat, int width) {
  return t.matmul(mat, t.constant(Tensor::vector(std::vector<double>(width, 1.0))));
}

// a*x + b elementwise on a [rows] vector
NodeId affine_vec(Tape& t, NodeId x, double a, double b, int rows) {
  return t.add(t.scale(x, a), t.constant(Tensor::vector(std::vector<double>(rows, b))));
}

NodeId sigmoid_of(Tape& t, NodeId x, double a, double b, int rows) {
  return t.elementwise(affine_vec(t, x, a, b, rows), Nonlin::Sigmoid);
}

}  // namespace

Tape::NodeId append_mean_lagrangian(Tape& t, const LagrangianSpec& L, NodeId pos, NodeId vel,
                                    int rows, NodeId metric_params) {
  double inv_rows = 1.0 / static_cast<double>(rows);
  NodeId kin = t.scale(t.sum(t.elementwise(vel, Nonlin::Square)), 0.5 * inv_rows);
  if (L.kind == LagrangianSpec::Kind::Kinetic) return kin;

  if (L.kind == LagrangianSpec::Kind::KineticMinusPotential) {
    const PotentialSpec& p = L.potential;
    double k = p.sharpness;
    NodeId u_sum = -1;  // sum over rows of U(pos_i), sign included
    switch (p.kind) {
      case PotentialSpec::Kind::Hill:
        u_sum = t.scale(t.sum(t.elementwise(pos, Nonlin::Square)), -p.m3);
        break;
      case PotentialSpec::Kind::Well: {
        NodeId r2 = row_sums(t, t.elementwise(pos, Nonlin::Square), 2);
        u_sum = t.scale(t.sum(t.elementwise(t.scale(r2, -1.0), Nonlin::Exp)), -p.m4);
        break;
      }
      case PotentialSpec::Kind::Box: {
        NodeId x1 = col2(t, pos, 0);
        NodeId x2 = col2(t, pos, 1);
        NodeId w1 = t.hadamard(sigmoid_of(t, x1, k, 0.5 * k, rows),
                               sigmoid_of(t, x1, -k, 0.5 * k, rows));
        NodeId w2 = t.hadamard(sigmoid_of(t, x2, k, 0.5 * k, rows),
                               sigmoid_of(t, x2, -k, 0.5 * k, rows));
        u_sum = t.scale(t.sum(t.hadamard(w1, w2)), -p.m1);
        break;
      }
      case PotentialSpec::Kind::Slit: {
        NodeId x1 = col2(t, pos, 0);
        NodeId x2 = col2(t, pos, 1);
        NodeId window = t.hadamard(sigmoid_of(t, x1, k, 0.1 * k, rows),
                                   sigmoid_of(t, x1, -k, 0.1 * k, rows));
        NodeId lower = sigmoid_of(t, x2, -k, -0.25 * k, rows);
        NodeId upper = sigmoid_of(t, x2, k, -0.25 * k, rows);
        u_sum = t.scale(t.sum(t.hadamard(window, t.add(lower, upper))), -p.m2);
        break;
      }
      case PotentialSpec::Kind::Gmm: {
        NodeId total = -1;
        for (const auto& c : kGmmBallCenters) {
          std::vector<double> shift(static_cast<size_t>(rows) * 2);
          for (int i = 0; i < rows; ++i) {
            shift[static_cast<size_t>(i) * 2] = -c[0];
            shift[static_cast<size_t>(i) * 2 + 1] = -c[1];
          }
          NodeId dx = t.add(pos, t.constant(Tensor::matrix(rows, 2, std::move(shift))));
          NodeId r = t.elementwise(row_sums(t, t.elementwise(dx, Nonlin::Square), 2),
                                   Nonlin::Sqrt);
          NodeId ind = sigmoid_of(t, r, -k, kGmmBallRadius * k, rows);
          total = total < 0 ? ind : t.add(total, ind);
        }
        u_sum = t.scale(t.sum(total), -p.m5);
        break;
      }
      default:
        throw std::invalid_argument("unknown potential kind");
    }
    return t.add(kin, t.scale(u_sum, -inv_rows));
  }

  // Metric Lagrangians: 0.5 * mean of v^T A(x) v.
  const MetricField& m = L.metric;
  switch (m.kind) {
    case MetricField::Kind::Circle: {
      NodeId r2 = row_sums(t, t.elementwise(pos, Nonlin::Square), 2);
      for (double v : t.value(r2).values)
        if (v == 0.0)
          throw std::invalid_argument("circle metric is undefined at the origin");
      NodeId xv = row_sums(t, t.hadamard(pos, vel), 2);
      NodeId radial = t.hadamard(t.elementwise(xv, Nonlin::Square),
                                 t.elementwise(r2, Nonlin::Recip));
      NodeId vsq = row_sums(t, t.elementwise(vel, Nonlin::Square), 2);
      return t.scale(t.sum(t.add(radial, t.scale(vsq, m.eps))), 0.5 * inv_rows);
    }
    case MetricField::Kind::MassSplitting: {
      NodeId s = t.elementwise(col2(t, pos, 1), Nonlin::Sign);
      NodeId wv = t.scale(t.add(col2(t, vel, 0), t.hadamard(s, col2(t, vel, 1))), kInvSqrt2);
      NodeId vsq = row_sums(t, t.elementwise(vel, Nonlin::Square), 2);
      NodeId val = t.sub(t.scale(vsq, 1.0 + m.delta), t.elementwise(wv, Nonlin::Square));
      return t.scale(t.sum(val), 0.5 * inv_rows);
    }
    case MetricField::Kind::XPaths: {
      NodeId p12 = t.hadamard(col2(t, pos, 0), col2(t, pos, 1));
      NodeId alpha = t.scale(
          t.elementwise(t.elementwise(p12, Nonlin::LeakyRelu, 0.0), Nonlin::Tanh), 1.25);
      NodeId beta = t.scale(
          t.elementwise(t.elementwise(t.scale(p12, -1.0), Nonlin::LeakyRelu, 0.0), Nonlin::Tanh),
          -1.25);
      NodeId w1v = t.matmul(vel, t.constant(Tensor::vector({kInvSqrt2, kInvSqrt2})));
      NodeId w2v = t.matmul(vel, t.constant(Tensor::vector({kInvSqrt2, -kInvSqrt2})));
      NodeId wv = t.add(t.hadamard(alpha, w1v), t.hadamard(beta, w2v));
      NodeId n2 = t.add(t.elementwise(alpha, Nonlin::Square), t.elementwise(beta, Nonlin::Square));
      NodeId clamp = t.elementwise(n2, Nonlin::InvClamp1);
      NodeId q = t.hadamard(clamp, t.elementwise(wv, Nonlin::Square));
      NodeId vsq = row_sums(t, t.elementwise(vel, Nonlin::Square), 2);
      NodeId val = t.sub(t.scale(vsq, 1.0 + m.delta), q);
      return t.scale(t.sum(val), 0.5 * inv_rows);
    }
    case MetricField::Kind::Learned: {
      NodeId params = metric_params >= 0 ? metric_params : t.constant(m.rotation_net.params);
      NodeId angles = m.rotation_net.apply(t, pos, params);  // [rows x 1]
      NodeId theta = t.slice(angles, 0, rows, {rows});
      NodeId c = t.elementwise(theta, Nonlin::Cos);
      NodeId s = t.elementwise(theta, Nonlin::Sin);
      NodeId v1 = col2(t, vel, 0);
      NodeId v2 = col2(t, vel, 1);
      NodeId u1 = t.add(t.hadamard(c, v1), t.hadamard(s, v2));
      NodeId u2 = t.sub(t.hadamard(c, v2), t.hadamard(s, v1));
      NodeId val = t.add(t.scale(t.elementwise(u1, Nonlin::Square), m.b_diag[0]),
                         t.scale(t.elementwise(u2, Nonlin::Square), m.b_diag[1]));
      return t.scale(t.sum(val), 0.5 * inv_rows);
    }
  }
  throw std::invalid_argument("unknown metric kind");
}

// ---------------------------------------------------------------------------
// 2x2 symmetric eigendecomposition
// ---------------------------------------------------------------------------

Eigen2 eigen_sym2(const std::array<double, 4>& a) {
  if (a[1] != a[2])
    throw std::invalid_argument("eigen_sym2: matrix is not symmetric");
  double a11 = a[0], a12 = a[1], a22 = a[3];
  double mid = 0.5 * (a11 + a22);
  double half_diff = 0.5 * (a11 - a22);
  double disc = std::hypot(half_diff, a12);
  Eigen2 e;
  e.values = {mid - disc, mid + disc};
  // eigenvector of the larger eigenvalue; pick the better-conditioned candidate
  double ca_x = a12, ca_y = disc - half_diff;
  double cb_x = disc + half_diff, cb_y = a12;
  double na = ca_x * ca_x + ca_y * ca_y;
  double nb = cb_x * cb_x + cb_y * cb_y;
  double vx, vy;
  if (na >= nb) {
    vx = ca_x;
    vy = ca_y;
  } else {
    vx = cb_x;
    vy = cb_y;
  }
  double n = std::sqrt(vx * vx + vy * vy);
  if (n == 0.0) {  // isotropic matrix, any orthonormal pair works
    vx = 1.0;
    vy = 0.0;
    n = 1.0;
  }
  e.vec2 = {vx / n, vy / n};
  e.vec1 = {-e.vec2[1], e.vec2[0]};
  return e;
}

}  // namespace lagot
