#include "lagot/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lagot/rng.hpp"

namespace lagot {

namespace {

using json = nlohmann::json;

constexpr double kTwoPi = 6.28318530717958647692;

PotentialSpec potential_of(const std::string& name) {
  PotentialSpec p;
  if (name == "box") p.kind = PotentialSpec::Kind::Box;
  else if (name == "slit") p.kind = PotentialSpec::Kind::Slit;
  else if (name == "hill") p.kind = PotentialSpec::Kind::Hill;
  else if (name == "well") p.kind = PotentialSpec::Kind::Well;
  else if (name == "gmm") p.kind = PotentialSpec::Kind::Gmm;
  else throw std::invalid_argument("no potential named " + name);
  return p;
}

void draw_gaussian_outside(Rng& rng, const PotentialSpec& p, double mx, double my, double sd,
                           EmpiricalMeasure& out) {
  // resample until the point clears the hard obstacle region
  for (;;) {
    double x = mx + sd * rng.normal();
    double y = my + sd * rng.normal();
    std::array<double, 2> pt{x, y};
    if (!inside_hard_obstacle(p, pt)) {
      out.push_back(pt);
      return;
    }
  }
}

}  // namespace

const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names{"box",  "slit",   "hill",           "well",
                                              "gmm",  "circle", "mass_splitting", "x_paths"};
  return names;
}

bool is_metric_dataset(const std::string& name) {
  return name == "circle" || name == "mass_splitting" || name == "x_paths";
}

int default_sample_count(const std::string& name) { return is_metric_dataset(name) ? 100 : 1024; }

std::vector<EmpiricalMeasure> generate(const DatasetSpec& spec) {
  const std::string& name = spec.name;
  if (std::find(dataset_names().begin(), dataset_names().end(), name) == dataset_names().end()) {
    std::string valid;
    for (const auto& n : dataset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown dataset '" + name + "' (valid: " + valid + ")");
  }
  int n = spec.samples > 0 ? spec.samples : default_sample_count(name);
  Rng rng(spec.seed);
  std::vector<EmpiricalMeasure> out;

  if (name == "circle") {
    // 24 Gaussians with means on the unit circle
    for (int i = 0; i < 24; ++i) {
      EmpiricalMeasure m;
      m.sequence_index = i;
      double cx = std::cos(kTwoPi * i / 24.0), cy = std::sin(kTwoPi * i / 24.0);
      for (int s = 0; s < n; ++s)
        m.push_back(std::array<double, 2>{cx + 0.1 * rng.normal(), cy + 0.1 * rng.normal()});
      out.push_back(std::move(m));
    }
    return out;
  }
  if (name == "mass_splitting") {
    // particles from N(0, I) translate toward (10, 10) or (10, -10) by the
    // sign of their second coordinate; 10 equispaced snapshots
    for (int i = 0; i < 10; ++i) {
      EmpiricalMeasure m;
      m.sequence_index = i;
      double t = static_cast<double>(i) / 9.0;
      for (int s = 0; s < n; ++s) {
        double x0 = rng.normal(), y0 = rng.normal();
        double ty = y0 >= 0.0 ? 10.0 : -10.0;
        m.push_back(std::array<double, 2>{x0 + t * 10.0, y0 + t * ty});
      }
      out.push_back(std::move(m));
    }
    return out;
  }
  if (name == "x_paths") {
    // two diagonal families, half the samples each, sigma = 0.1
    for (int i = 0; i < 10; ++i) {
      EmpiricalMeasure m;
      m.sequence_index = i;
      double t = static_cast<double>(i) / 9.0;
      for (int s = 0; s < n; ++s) {
        bool first = (s % 2) == 0;  // (-1,-1)->(1,1) family, else (-1,1)->(1,-1)
        double mx = -1.0 + 2.0 * t;
        double my = first ? -1.0 + 2.0 * t : 1.0 - 2.0 * t;
        m.push_back(std::array<double, 2>{mx + 0.1 * rng.normal(), my + 0.1 * rng.normal()});
      }
      out.push_back(std::move(m));
    }
    return out;
  }

  PotentialSpec p = potential_of(name);
  EmpiricalMeasure mu, nu;
  mu.sequence_index = 0;
  nu.sequence_index = 1;
  if (name == "gmm") {
    for (int s = 0; s < n; ++s) draw_gaussian_outside(rng, p, 0.0, 0.0, 0.5, mu);
    for (int s = 0; s < n; ++s) {
      int j = rng.uniform_int(8);
      double cx = 12.0 * std::cos(kTwoPi * j / 8.0), cy = 12.0 * std::sin(kTwoPi * j / 8.0);
      draw_gaussian_outside(rng, p, cx, cy, 0.5, nu);
    }
  } else {
    for (int s = 0; s < n; ++s) draw_gaussian_outside(rng, p, -1.5, 0.0, 0.2, mu);
    for (int s = 0; s < n; ++s) draw_gaussian_outside(rng, p, 1.5, 0.0, 0.2, nu);
  }
  out.push_back(std::move(mu));
  out.push_back(std::move(nu));
  return out;
}

MetricField ground_truth_metric(const std::string& name) {
  if (name == "circle") return MetricField::circle(0.1);
  if (name == "mass_splitting") return MetricField::mass_splitting(0.1);
  if (name == "x_paths") return MetricField::x_paths(0.1);
  throw std::invalid_argument("dataset '" + name + "' has no ground-truth metric");
}

LagrangianSpec dataset_lagrangian(const std::string& name) {
  if (is_metric_dataset(name)) return LagrangianSpec::with_metric(ground_truth_metric(name));
  return LagrangianSpec::with_potential(potential_of(name));
}

std::array<double, 4> bounding_box(const std::vector<EmpiricalMeasure>& measures) {
  std::array<double, 4> box{1e300, 1e300, -1e300, -1e300};
  for (const auto& m : measures)
    for (int i = 0; i < m.size(); ++i) {
      auto pt = m.point(i);
      box[0] = std::min(box[0], pt[0]);
      box[1] = std::min(box[1], pt[1]);
      box[2] = std::max(box[2], pt[0]);
      box[3] = std::max(box[3], pt[1]);
    }
  return box;
}

std::vector<double> evaluation_grid(const std::array<double, 4>& box, int nx, int ny,
                                    double expand) {
  double ex = (box[2] - box[0]) * expand, ey = (box[3] - box[1]) * expand;
  double x0 = box[0] - ex, x1 = box[2] + ex;
  double y0 = box[1] - ey, y1 = box[3] + ey;
  std::vector<double> grid;
  grid.reserve(static_cast<size_t>(nx) * ny * 2);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      grid.push_back(x0 + (x1 - x0) * i / static_cast<double>(nx - 1));
      grid.push_back(y0 + (y1 - y0) * j / static_cast<double>(ny - 1));
    }
  return grid;
}

// ---------------------------------------------------------------------------
// Exact assignment
// ---------------------------------------------------------------------------

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (static_cast<int>(cost.size()) != n * n)
    throw std::invalid_argument("assignment: cost matrix is not n x n");
  const double kInf = 1e300;
  // shortest augmenting paths with dual potentials, 1-indexed with a virtual
  // column 0 holding the row currently being inserted
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j)
        if (!used[static_cast<size_t>(j)]) {
          double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<size_t>(i0)] -
                       v[static_cast<size_t>(j)];
          if (cur < minv[static_cast<size_t>(j)]) {
            minv[static_cast<size_t>(j)] = cur;
            way[static_cast<size_t>(j)] = j0;
          }
          if (minv[static_cast<size_t>(j)] < delta) {
            delta = minv[static_cast<size_t>(j)];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

double w2_marginal_error(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("w2: sample counts differ, " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  if (a.dim != b.dim) throw std::invalid_argument("w2: dimensions differ");
  int n = a.size();
  if (n == 0) throw std::invalid_argument("w2: empty measures");
  if (n > 4096) throw std::invalid_argument("w2: exact assignment is limited to 4096 samples");

  std::vector<double> cost(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    auto pa = a.point(i);
    for (int j = 0; j < n; ++j) {
      auto pb = b.point(j);
      double s = 0.0;
      for (int c = 0; c < a.dim; ++c) {
        double d = pa[static_cast<size_t>(c)] - pb[static_cast<size_t>(c)];
        s += d * d;
      }
      cost[static_cast<size_t>(i) * n + j] = s;
    }
  }
  auto match = solve_assignment(cost, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost[static_cast<size_t>(i) * n + match[static_cast<size_t>(i)]];
  return std::sqrt(total / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

void write_dataset(const std::string& dir, const DatasetSpec& spec,
                   const std::vector<EmpiricalMeasure>& measures) {
  std::filesystem::create_directories(dir);
  char buf[64];
  for (size_t i = 0; i < measures.size(); ++i) {
    std::ofstream os(dir + "/rho_" + std::to_string(i) + ".csv");
    if (!os) throw std::runtime_error("cannot write dataset files in " + dir);
    os << "x1,x2\n";
    const auto& m = measures[i];
    for (int s = 0; s < m.size(); ++s) {
      auto pt = m.point(s);
      std::snprintf(buf, sizeof buf, "%.17g", pt[0]);
      os << buf;
      std::snprintf(buf, sizeof buf, "%.17g", pt[1]);
      os << "," << buf << "\n";
    }
  }
  json manifest{{"name", spec.name},
                {"n", spec.samples > 0 ? spec.samples : default_sample_count(spec.name)},
                {"seed", spec.seed},
                {"k", measures.size()},
                {"d", 2}};
  std::ofstream os(dir + "/manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write manifest in " + dir);
}

std::vector<EmpiricalMeasure> load_dataset(const std::string& dir, DatasetSpec* spec_out) {
  std::ifstream ms(dir + "/manifest.json");
  if (!ms) throw std::runtime_error("no manifest.json in " + dir);
  json manifest = json::parse(ms);
  size_t k = manifest.at("k").get<size_t>();
  if (spec_out) {
    spec_out->name = manifest.at("name").get<std::string>();
    spec_out->samples = manifest.at("n").get<int>();
    spec_out->seed = manifest.at("seed").get<uint64_t>();
  }
  std::vector<EmpiricalMeasure> out;
  for (size_t i = 0; i < k; ++i) {
    std::ifstream is(dir + "/rho_" + std::to_string(i) + ".csv");
    if (!is) throw std::runtime_error("missing rho_" + std::to_string(i) + ".csv in " + dir);
    std::string line;
    std::getline(is, line);  // header
    EmpiricalMeasure m;
    m.sequence_index = static_cast<int>(i);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      size_t comma = line.find(',');
      m.push_back(std::array<double, 2>{std::stod(line.substr(0, comma)),
                                        std::stod(line.substr(comma + 1))});
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace lagot
