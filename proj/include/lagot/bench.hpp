#pragma once

#include <span>
#include <string>
#include <vector>

#include "lagot/lagrangian.hpp"

namespace lagot {

// Finite sample set in R^d, optionally tagged with its position in a
// measure sequence.
struct EmpiricalMeasure {
  std::vector<double> points;  // [size x dim] row-major
  int dim = 2;
  int sequence_index = -1;

  int size() const { return dim == 0 ? 0 : static_cast<int>(points.size()) / dim; }
  std::span<const double> point(int i) const {
    return {points.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
  }
  void push_back(std::span<const double> p) { points.insert(points.end(), p.begin(), p.end()); }
};

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

struct DatasetSpec {
  std::string name;  // box, slit, hill, well, gmm, circle, mass_splitting, x_paths
  int samples = 0;   // 0: per-name default (100 for metric sequences, 1024 otherwise)
  uint64_t seed = 0;
};

const std::vector<std::string>& dataset_names();
bool is_metric_dataset(const std::string& name);
int default_sample_count(const std::string& name);

// Deterministic in (name, samples, seed). Potential settings return {mu, nu};
// metric settings return the full measure sequence.
std::vector<EmpiricalMeasure> generate(const DatasetSpec& spec);

// Ground-truth metric field for the metric datasets (throws otherwise).
MetricField ground_truth_metric(const std::string& name);

// Lagrangian the dataset was designed for (kinetic-plus-potential for the
// obstacle settings, the ground-truth metric for the sequence settings).
LagrangianSpec dataset_lagrangian(const std::string& name);

// Axis-aligned bounding box over all samples: {min_x, min_y, max_x, max_y}.
std::array<double, 4> bounding_box(const std::vector<EmpiricalMeasure>& measures);

// Uniform nx-by-ny grid over the box expanded by `expand` on each side
// (fraction of the box extent), flattened [x, y] pairs.
std::vector<double> evaluation_grid(const std::array<double, 4>& box, int nx = 20, int ny = 20,
                                    double expand = 0.1);

// ---------------------------------------------------------------------------
// Exact discrete optimal transport (evaluation oracle)
// ---------------------------------------------------------------------------

// Minimum-cost perfect matching on an n-by-n cost matrix (row-major) via
// shortest augmenting paths with dual potentials; returns the column assigned
// to each row. O(n^3).
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

// Exact 2-Wasserstein distance between equal-size samples:
// sqrt(min over matchings of mean squared distance). n <= 4096.
double w2_marginal_error(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// ---------------------------------------------------------------------------
// Dataset directory layout: rho_<i>.csv (header x1,x2) plus manifest.json
// ---------------------------------------------------------------------------

void write_dataset(const std::string& dir, const DatasetSpec& spec,
                   const std::vector<EmpiricalMeasure>& measures);
std::vector<EmpiricalMeasure> load_dataset(const std::string& dir, DatasetSpec* spec_out = nullptr);

}  // namespace lagot
