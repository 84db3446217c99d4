#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace lagot {

// Natural cubic spline path gamma: [0,1] -> R^d through n knots at uniform
// times j/(n-1). Knot row 0 is the start point, row n-1 the end point, and
// the (n-2) x d interior knot values are the free path parameters. Natural
// boundary conditions (zero second derivative at both ends) close the C^2
// interpolation system. Immutable once built.
struct PathSpline {
  int knot_count = 0;
  int dim = 0;
  std::vector<double> knots;          // [n x d] row-major knot values
  std::vector<double> second_derivs;  // [n x d]; rows 0 and n-1 are zero

  double knot_time(int j) const;
  std::span<const double> knot(int j) const;
  std::span<const double> start() const { return knot(0); }
  std::span<const double> end() const { return knot(knot_count - 1); }

  // t must lie in [0,1]; t == 0 and t == 1 return the endpoints bit-exactly.
  std::vector<double> position(double t) const;
  std::vector<double> velocity(double t) const;
  std::vector<double> acceleration(double t) const;
  void position_into(double t, std::span<double> out) const;
  void velocity_into(double t, std::span<double> out) const;
  void acceleration_into(double t, std::span<double> out) const;

  // One-sided evaluation on the segment left/right of an interior knot,
  // for continuity checks.
  void eval_segment(int segment, double t, std::span<double> pos, std::span<double> vel,
                    std::span<double> acc) const;
};

// phi holds the interior knot values, row-major [(n-2) x d].
PathSpline build_spline(std::span<const double> x, std::span<const double> y,
                        std::span<const double> phi, int knot_count);

// Interior waypoints of the straight segment from x to y.
std::vector<double> chord_phi(std::span<const double> x, std::span<const double> y,
                              int knot_count);

// Position/velocity of the spline at fixed times as linear maps of the knot
// values: row q of pos_weights (resp. vel_weights) gives gamma(times[q]) =
// sum_j w[q][j] * knot_j per coordinate. Shape [times.size() x n] row-major.
struct SplineBasis {
  int knot_count = 0;
  std::vector<double> times;
  std::vector<double> pos_weights;
  std::vector<double> vel_weights;
};

SplineBasis spline_basis(int knot_count, std::span<const double> times);

// CSV rows `pair_id,t,x1,...,xd` sampled at `resolution` uniform times per path.
void export_paths_csv(std::ostream& os,
                      const std::vector<std::pair<int, const PathSpline*>>& paths,
                      int resolution = 64);

}  // namespace lagot
