#pragma once

#include <array>
#include <span>
#include <string>

#include "lagot/autodiff.hpp"
#include "lagot/nn.hpp"

namespace lagot {

// ---------------------------------------------------------------------------
// Potentials U(x) on R^2. Hard indicator constraints are smoothed with
// sigmoids of sharpness `sharpness` per unit distance, keeping U C^1.
// ---------------------------------------------------------------------------

struct PotentialSpec {
  enum class Kind { Box, Slit, Hill, Well, Gmm };
  Kind kind = Kind::Hill;
  double m1 = 0.01, m2 = 1.0, m3 = 0.05, m4 = 0.01, m5 = 0.1;
  double sharpness = 20.0;
};

// Centers of the three obstacle balls of the GMM setting, radius 1.5.
inline constexpr std::array<std::array<double, 2>, 3> kGmmBallCenters{
    {{6.0, 6.0}, {6.0, -6.0}, {-6.0, -6.0}}};
inline constexpr double kGmmBallRadius = 1.5;

double potential_value(const PotentialSpec& p, std::span<const double> x);

// Hard (unsmoothed) variant, for obstacle membership tests and data rejection.
bool inside_hard_obstacle(const PotentialSpec& p, std::span<const double> x);

// ---------------------------------------------------------------------------
// Riemannian metric fields A(x) on R^2
// ---------------------------------------------------------------------------

struct MetricField {
  enum class Kind { Circle, MassSplitting, XPaths, Learned };
  Kind kind = Kind::Circle;
  double eps = 0.1;    // circle: A = xhat xhat^T + eps I
  double delta = 0.1;  // splitting metrics: A = I - w w^T + delta I
  Mlp rotation_net;    // learned: A = R(theta(x)) B R(theta(x))^T
  std::array<double, 2> b_diag{1.0, 0.1};

  static MetricField circle(double eps = 0.1);
  static MetricField mass_splitting(double delta = 0.1);
  static MetricField x_paths(double delta = 0.1);
  static MetricField learned(Mlp rotation_net, std::array<double, 2> b_diag = {1.0, 0.1});
};

// Row-major [a11, a12, a21, a22]; always symmetric and positive definite.
// The circle metric is undefined at the origin and throws there.
std::array<double, 4> metric_value(const MetricField& m, std::span<const double> x);

// ---------------------------------------------------------------------------
// Lagrangians L(x, v)
// ---------------------------------------------------------------------------

struct LagrangianSpec {
  enum class Kind { Kinetic, KineticMinusPotential, Metric };
  Kind kind = Kind::Kinetic;
  PotentialSpec potential;
  MetricField metric;

  static LagrangianSpec kinetic();
  static LagrangianSpec with_potential(PotentialSpec p);
  static LagrangianSpec with_metric(MetricField m);

  bool has_learned_metric() const {
    return kind == Kind::Metric && metric.kind == MetricField::Kind::Learned;
  }
};

double lagrangian_value(const LagrangianSpec& L, std::span<const double> x,
                        std::span<const double> v);

// Appends (1/rows) * sum_i L(pos_i, vel_i) to the tape, where pos and vel are
// [rows x 2] position/velocity nodes ([rows x d] for the kinetic case).
// metric_params supplies the rotation-net parameter node for the learned
// metric (pass a constant node to freeze it); ignored otherwise.
Tape::NodeId append_mean_lagrangian(Tape& t, const LagrangianSpec& L, Tape::NodeId pos,
                                    Tape::NodeId vel, int rows,
                                    Tape::NodeId metric_params = -1);

// Ascending eigenvalues and matching unit eigenvectors of a symmetric 2x2.
struct Eigen2 {
  std::array<double, 2> values;   // lambda_1 <= lambda_2
  std::array<double, 2> vec1, vec2;
};
Eigen2 eigen_sym2(const std::array<double, 4>& a);

}  // namespace lagot
