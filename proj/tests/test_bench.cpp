#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lagot/bench.hpp"
#include "lagot/rng.hpp"

using namespace lagot;

namespace {

EmpiricalMeasure from_points(std::vector<double> pts) {
  EmpiricalMeasure m;
  m.points = std::move(pts);
  return m;
}

double brute_force_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  int n = a.size();
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      auto pa = a.point(i);
      auto pb = b.point(perm[static_cast<size_t>(i)]);
      total += (pa[0] - pb[0]) * (pa[0] - pb[0]) + (pa[1] - pb[1]) * (pa[1] - pb[1]);
    }
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

}  // namespace

TEST_CASE("w2 of identical sample sets is zero, of a unit shift is one") {
  auto a = from_points({0, 0, 1, 2, -3, 4});
  CHECK(w2_marginal_error(a, a) == 0.0);
  auto x = from_points({0, 0});
  auto y = from_points({1, 0});
  CHECK(w2_marginal_error(x, y) == 1.0);
}

TEST_CASE("assignment solver equals permutation brute force for n <= 6") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 2 + trial % 5;
    std::vector<double> pa(static_cast<size_t>(n) * 2), pb(static_cast<size_t>(n) * 2);
    for (double& v : pa) v = rng.uniform(-3, 3);
    for (double& v : pb) v = rng.uniform(-3, 3);
    auto a = from_points(pa);
    auto b = from_points(pb);
    double fast = w2_marginal_error(a, b);
    double slow = brute_force_w2(a, b);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-13));
  }
}

TEST_CASE("w2 satisfies the metric axioms on random triples") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 8;
    std::vector<double> pa(static_cast<size_t>(n) * 2), pb(pa.size()), pc(pa.size());
    for (double& v : pa) v = rng.uniform(-2, 2);
    for (double& v : pb) v = rng.uniform(-2, 2);
    for (double& v : pc) v = rng.uniform(-2, 2);
    auto a = from_points(pa), b = from_points(pb), c = from_points(pc);
    double ab = w2_marginal_error(a, b);
    double ba = w2_marginal_error(b, a);
    double ac = w2_marginal_error(a, c);
    double cb = w2_marginal_error(c, b);
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab <= ac + cb + 1e-9);
    CHECK(w2_marginal_error(a, a) < 1e-12);
  }
}

TEST_CASE("w2 rejects mismatched sample counts") {
  auto a = from_points({0, 0, 1, 1});
  auto b = from_points({0, 0});
  CHECK_THROWS_AS(w2_marginal_error(a, b), std::invalid_argument);
}

TEST_CASE("generation is a pure function of name, count and seed") {
  DatasetSpec spec{"circle", 50, 1234};
  auto a = generate(spec);
  auto b = generate(spec);
  REQUIRE(a.size() == 24);
  REQUIRE(b.size() == 24);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].points == b[i].points);
  auto c = generate(DatasetSpec{"circle", 50, 1235});
  CHECK(a[0].points != c[0].points);
}

TEST_CASE("circle measures sit on the unit circle") {
  DatasetSpec spec{"circle", 400, 7};
  auto measures = generate(spec);
  double mx = 0, my = 0;
  for (int i = 0; i < measures[0].size(); ++i) {
    mx += measures[0].point(i)[0];
    my += measures[0].point(i)[1];
  }
  mx /= measures[0].size();
  my /= measures[0].size();
  double bound = 3.0 * 0.1 / std::sqrt(400.0);
  CHECK(std::abs(mx - 1.0) < bound);
  CHECK(std::abs(my - 0.0) < bound);
}

TEST_CASE("mass splitting ends in a near even split") {
  DatasetSpec spec{"mass_splitting", 100, 3};
  auto measures = generate(spec);
  REQUIRE(measures.size() == 10);
  int upper = 0, lower = 0;
  const auto& last = measures.back();
  for (int i = 0; i < last.size(); ++i) {
    auto p = last.point(i);
    if (std::hypot(p[0] - 10.0, p[1] - 10.0) < 6.0) ++upper;
    if (std::hypot(p[0] - 10.0, p[1] + 10.0) < 6.0) ++lower;
  }
  CHECK(upper + lower == 100);
  CHECK(std::abs(upper - 50.0) < 3.0 * 5.0);  // binomial 3 sigma
}

TEST_CASE("x paths snapshots move along both diagonals") {
  DatasetSpec spec{"x_paths", 60, 3};
  auto measures = generate(spec);
  REQUIRE(measures.size() == 10);
  const auto& first = measures.front();
  const auto& mid = measures[4];
  // the two families coincide near the crossing time and split elsewhere
  double spread_first = 0, spread_mid = 0;
  for (int i = 0; i < first.size(); ++i) {
    spread_first += std::abs(first.point(i)[1]);
    spread_mid += std::abs(mid.point(i)[1]);
  }
  CHECK(spread_first / first.size() > 0.8);
  CHECK(spread_mid / mid.size() < 0.35);
}

TEST_CASE("single-sample generation works") {
  for (const auto& name : dataset_names()) {
    auto measures = generate(DatasetSpec{name, 1, 11});
    for (const auto& m : measures) {
      CHECK(m.size() == 1);
      CHECK(std::isfinite(m.point(0)[0]));
      CHECK(std::isfinite(m.point(0)[1]));
    }
  }
}

TEST_CASE("no generated sample lies inside a hard obstacle") {
  for (const std::string name : {"box", "slit", "gmm"}) {
    PotentialSpec p;
    p.kind = name == "box" ? PotentialSpec::Kind::Box
             : name == "slit" ? PotentialSpec::Kind::Slit
                              : PotentialSpec::Kind::Gmm;
    auto measures = generate(DatasetSpec{name, 2000, 99});
    for (const auto& m : measures)
      for (int i = 0; i < m.size(); ++i) CHECK(!inside_hard_obstacle(p, m.point(i)));
  }
}

TEST_CASE("unknown dataset names are rejected with the valid list") {
  CHECK_THROWS_WITH_AS(generate(DatasetSpec{"nope", 10, 0}), doctest::Contains("circle"),
                       std::invalid_argument);
}

TEST_CASE("dataset files round-trip and are byte stable") {
  namespace fs = std::filesystem;
  auto dir1 = fs::temp_directory_path() / "lagot_ds_a";
  auto dir2 = fs::temp_directory_path() / "lagot_ds_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  DatasetSpec spec{"x_paths", 20, 5};
  auto measures = generate(spec);
  write_dataset(dir1.string(), spec, measures);
  write_dataset(dir2.string(), spec, generate(spec));

  for (int i = 0; i < 10; ++i) {
    std::ifstream f1(dir1 / ("rho_" + std::to_string(i) + ".csv"));
    std::ifstream f2(dir2 / ("rho_" + std::to_string(i) + ".csv"));
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    REQUIRE(!s1.str().empty());
    CHECK(s1.str() == s2.str());
  }

  DatasetSpec back;
  auto loaded = load_dataset(dir1.string(), &back);
  CHECK(back.name == "x_paths");
  CHECK(back.samples == 20);
  REQUIRE(loaded.size() == measures.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    REQUIRE(loaded[i].size() == measures[i].size());
    for (int s = 0; s < loaded[i].size(); ++s) {
      CHECK(loaded[i].point(s)[0] == measures[i].point(s)[0]);
      CHECK(loaded[i].point(s)[1] == measures[i].point(s)[1]);
    }
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("bounding box and evaluation grid") {
  auto measures = generate(DatasetSpec{"circle", 64, 2});
  auto box = bounding_box(measures);
  CHECK(box[0] < -0.8);
  CHECK(box[2] > 0.8);
  auto grid = evaluation_grid(box, 20, 20, 0.1);
  CHECK(grid.size() == 800);
  for (size_t i = 0; i < grid.size(); i += 2) {
    CHECK(grid[i] >= box[0] - 0.11 * (box[2] - box[0]) - 1e-12);
    CHECK(grid[i] <= box[2] + 0.11 * (box[2] - box[0]) + 1e-12);
  }
}
