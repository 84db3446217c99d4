#include "lagot/spline.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace lagot {

namespace {

// Solves the natural-spline system for the knot second derivatives M:
//   M[0] = M[n-1] = 0,
//   M[j-1] + 4 M[j] + M[j+1] = 6 (z[j+1] - 2 z[j] + z[j-1]) / h^2,
// simultaneously for all d coordinate columns of z ([n x d] row-major).
std::vector<double> solve_second_derivs(const std::vector<double>& z, int n, int d) {
  std::vector<double> m(static_cast<size_t>(n) * d, 0.0);
  int interior = n - 2;
  if (interior <= 0) return m;
  double h = 1.0 / static_cast<double>(n - 1);
  double inv_h2 = 1.0 / (h * h);

  std::vector<double> diag(interior), rhs(static_cast<size_t>(interior) * d);
  for (int j = 0; j < interior; ++j)
    for (int c = 0; c < d; ++c)
      rhs[static_cast<size_t>(j) * d + c] =
          6.0 * inv_h2 *
          (z[static_cast<size_t>(j + 2) * d + c] - 2.0 * z[static_cast<size_t>(j + 1) * d + c] +
           z[static_cast<size_t>(j) * d + c]);

  // Thomas algorithm on the constant tridiagonal (1, 4, 1).
  diag[0] = 4.0;
  for (int j = 1; j < interior; ++j) {
    double w = 1.0 / diag[j - 1];
    diag[j] = 4.0 - w;
    for (int c = 0; c < d; ++c)
      rhs[static_cast<size_t>(j) * d + c] -= w * rhs[static_cast<size_t>(j - 1) * d + c];
  }
  for (int c = 0; c < d; ++c)
    m[static_cast<size_t>(interior) * d + c] =
        rhs[static_cast<size_t>(interior - 1) * d + c] / diag[interior - 1];
  for (int j = interior - 2; j >= 0; --j)
    for (int c = 0; c < d; ++c)
      m[static_cast<size_t>(j + 1) * d + c] =
          (rhs[static_cast<size_t>(j) * d + c] - m[static_cast<size_t>(j + 2) * d + c]) / diag[j];
  return m;
}

}  // namespace

double PathSpline::knot_time(int j) const {
  return static_cast<double>(j) / static_cast<double>(knot_count - 1);
}

std::span<const double> PathSpline::knot(int j) const {
  return {knots.data() + static_cast<size_t>(j) * dim, static_cast<size_t>(dim)};
}

// Segment polynomial in s = t - t_j:
//   gamma(s) = z_j + b s + (M_j / 2) s^2 + ((M_{j+1} - M_j) / (6h)) s^3,
//   b = (z_{j+1} - z_j)/h - h (2 M_j + M_{j+1}) / 6.
void PathSpline::eval_segment(int seg, double t, std::span<double> pos, std::span<double> vel,
                              std::span<double> acc) const {
  double h = 1.0 / static_cast<double>(knot_count - 1);
  double s = t - static_cast<double>(seg) * h;
  const double* z0 = knots.data() + static_cast<size_t>(seg) * dim;
  const double* z1 = z0 + dim;
  const double* m0 = second_derivs.data() + static_cast<size_t>(seg) * dim;
  const double* m1 = m0 + dim;
  for (int c = 0; c < dim; ++c) {
    double b = (z1[c] - z0[c]) / h - h * (2.0 * m0[c] + m1[c]) / 6.0;
    double cc = 0.5 * m0[c];
    double dd = (m1[c] - m0[c]) / (6.0 * h);
    if (!pos.empty()) pos[static_cast<size_t>(c)] = z0[c] + s * (b + s * (cc + s * dd));
    if (!vel.empty()) vel[static_cast<size_t>(c)] = b + s * (2.0 * cc + 3.0 * s * dd);
    if (!acc.empty()) acc[static_cast<size_t>(c)] = 2.0 * cc + 6.0 * s * dd;
  }
}

namespace {

int segment_of(double t, int n) {
  int seg = static_cast<int>(t * static_cast<double>(n - 1));
  if (seg > n - 2) seg = n - 2;
  return seg;
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("spline evaluation time " + std::to_string(t) +
                                " outside [0,1]");
}

}  // namespace

void PathSpline::position_into(double t, std::span<double> out) const {
  check_time(t);
  if (t == 0.0 || t == 1.0) {  // endpoint knots are exact
    auto k = knot(t == 0.0 ? 0 : knot_count - 1);
    for (int c = 0; c < dim; ++c) out[static_cast<size_t>(c)] = k[static_cast<size_t>(c)];
    return;
  }
  eval_segment(segment_of(t, knot_count), t, out, {}, {});
}

void PathSpline::velocity_into(double t, std::span<double> out) const {
  check_time(t);
  eval_segment(segment_of(t, knot_count), t, {}, out, {});
}

void PathSpline::acceleration_into(double t, std::span<double> out) const {
  check_time(t);
  eval_segment(segment_of(t, knot_count), t, {}, {}, out);
}

std::vector<double> PathSpline::position(double t) const {
  std::vector<double> out(static_cast<size_t>(dim));
  position_into(t, out);
  return out;
}

std::vector<double> PathSpline::velocity(double t) const {
  std::vector<double> out(static_cast<size_t>(dim));
  velocity_into(t, out);
  return out;
}

std::vector<double> PathSpline::acceleration(double t) const {
  std::vector<double> out(static_cast<size_t>(dim));
  acceleration_into(t, out);
  return out;
}

PathSpline build_spline(std::span<const double> x, std::span<const double> y,
                        std::span<const double> phi, int knot_count) {
  if (knot_count < 2)
    throw std::invalid_argument("spline needs at least 2 knots, got " +
                                std::to_string(knot_count));
  int d = static_cast<int>(x.size());
  if (static_cast<int>(y.size()) != d)
    throw std::invalid_argument("spline endpoints have different dimensions");
  if (static_cast<int>(phi.size()) != (knot_count - 2) * d)
    throw std::invalid_argument("spline free parameters: expected " +
                                std::to_string((knot_count - 2) * d) + " values, got " +
                                std::to_string(phi.size()));
  for (double v : phi)
    if (!std::isfinite(v)) throw std::invalid_argument("spline free parameters must be finite");

  PathSpline s;
  s.knot_count = knot_count;
  s.dim = d;
  s.knots.resize(static_cast<size_t>(knot_count) * d);
  for (int c = 0; c < d; ++c) s.knots[static_cast<size_t>(c)] = x[static_cast<size_t>(c)];
  for (size_t i = 0; i < phi.size(); ++i) s.knots[static_cast<size_t>(d) + i] = phi[i];
  for (int c = 0; c < d; ++c)
    s.knots[static_cast<size_t>(knot_count - 1) * d + c] = y[static_cast<size_t>(c)];
  s.second_derivs = solve_second_derivs(s.knots, knot_count, d);
  return s;
}

std::vector<double> chord_phi(std::span<const double> x, std::span<const double> y,
                              int knot_count) {
  int d = static_cast<int>(x.size());
  std::vector<double> phi(static_cast<size_t>(std::max(knot_count - 2, 0)) * d);
  for (int j = 1; j + 1 < knot_count; ++j) {
    double t = static_cast<double>(j) / static_cast<double>(knot_count - 1);
    for (int c = 0; c < d; ++c)
      phi[static_cast<size_t>(j - 1) * d + c] =
          x[static_cast<size_t>(c)] + t * (y[static_cast<size_t>(c)] - x[static_cast<size_t>(c)]);
  }
  return phi;
}

SplineBasis spline_basis(int knot_count, std::span<const double> times) {
  SplineBasis basis;
  basis.knot_count = knot_count;
  basis.times.assign(times.begin(), times.end());
  size_t q = times.size();
  basis.pos_weights.assign(q * static_cast<size_t>(knot_count), 0.0);
  basis.vel_weights.assign(q * static_cast<size_t>(knot_count), 0.0);

  // The spline is linear in its knot values, so evaluating unit knot vectors
  // yields the weight columns.
  std::vector<double> unit(static_cast<size_t>(knot_count), 0.0);
  for (int j = 0; j < knot_count; ++j) {
    unit[static_cast<size_t>(j)] = 1.0;
    PathSpline s;
    s.knot_count = knot_count;
    s.dim = 1;
    s.knots = unit;
    s.second_derivs = solve_second_derivs(unit, knot_count, 1);
    double pos, vel;
    for (size_t i = 0; i < q; ++i) {
      check_time(times[i]);
      s.eval_segment(segment_of(times[i], knot_count), times[i], {&pos, 1}, {&vel, 1}, {});
      basis.pos_weights[i * knot_count + j] = pos;
      basis.vel_weights[i * knot_count + j] = vel;
    }
    unit[static_cast<size_t>(j)] = 0.0;
  }
  return basis;
}

void export_paths_csv(std::ostream& os,
                      const std::vector<std::pair<int, const PathSpline*>>& paths,
                      int resolution) {
  if (resolution < 2) throw std::invalid_argument("path export needs resolution >= 2");
  int d = paths.empty() ? 2 : paths.front().second->dim;
  os << "pair_id,t";
  for (int c = 1; c <= d; ++c) os << ",x" << c;
  os << "\n";
  char buf[64];
  std::vector<double> p(static_cast<size_t>(d));
  for (const auto& [id, spline] : paths) {
    for (int i = 0; i < resolution; ++i) {
      double t = static_cast<double>(i) / static_cast<double>(resolution - 1);
      if (i == resolution - 1) t = 1.0;
      spline->position_into(t, p);
      std::snprintf(buf, sizeof buf, "%.17g", t);
      os << id << "," << buf;
      for (int c = 0; c < d; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", p[static_cast<size_t>(c)]);
        os << "," << buf;
      }
      os << "\n";
    }
  }
}

}  // namespace lagot
