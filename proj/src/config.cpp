#include "lagot/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lagot {

const std::map<std::string, RunConfig::SchemaEntry>& RunConfig::schema() {
  using T = Type;
  static const std::map<std::string, SchemaEntry> s{
      {"dataset.name", {T::String, "", "dataset to train on (see gen-data --setting)"}},
      {"dataset.n", {T::Int, "0", "samples per measure; 0 uses the per-dataset default"}},
      {"seed", {T::Int, "0", "master seed for parameters and batch sampling"}},
      {"steps", {T::Int, "2000", "training steps (outer steps for train-metric)"}},
      {"batch", {T::Int, "1024", "samples per training batch"}},
      {"knots", {T::Int, "30", "spline knot count"}},
      {"quadrature", {T::Int, "100", "quadrature nodes for the path action"}},
      {"lbfgs.iters", {T::Int, "20", "c-transform fine-tune iterations"}},
      {"lbfgs.history", {T::Int, "10", "L-BFGS history size"}},
      {"lbfgs.c1", {T::Double, "0.0001", "Armijo constant"}},
      {"lbfgs.backtrack", {T::Double, "0.5", "line-search backtracking factor"}},
      {"lbfgs.tol", {T::Double, "1e-08", "gradient norm tolerance"}},
      {"g.layers", {T::String, "64,64,64,64", "hidden sizes of the potential"}},
      {"y.layers", {T::String, "64,64,64,64", "hidden sizes of the conjugate predictor"}},
      {"predictor.layers", {T::String, "1024,1024", "hidden sizes of the spline predictor"}},
      {"g.rate.start", {T::Double, "0.0001", "potential learning rate at step 0"}},
      {"g.rate.end", {T::Double, "0.01", "potential learning rate at the last step"}},
      {"y.rate.start", {T::Double, "0.0001", "conjugate predictor rate at step 0"}},
      {"y.rate.end", {T::Double, "0.01", "conjugate predictor rate at the last step"}},
      {"predictor.rate", {T::Double, "0.0001", "spline predictor learning rate"}},
      {"leaky.slope", {T::Double, "0.01", "Leaky-ReLU negative slope"}},
      {"lagrangian.kind",
       {T::String, "kinetic",
        "kinetic, potential.{box,slit,hill,well,gmm}, or metric.{circle,mass_splitting,x_paths}"}},
      {"lagrangian.m1", {T::Double, "0.01", "box barrier height"}},
      {"lagrangian.m2", {T::Double, "1", "slit barrier height"}},
      {"lagrangian.m3", {T::Double, "0.05", "hill coefficient"}},
      {"lagrangian.m4", {T::Double, "0.01", "well depth"}},
      {"lagrangian.m5", {T::Double, "0.1", "ball barrier height"}},
      {"lagrangian.sharpness", {T::Double, "20", "sigmoid sharpness of smoothed indicators"}},
      {"metric.eps", {T::Double, "0.1", "circle metric regularization"}},
      {"metric.delta", {T::Double, "0.1", "splitting metric regularization"}},
      {"metric.rate", {T::Double, "0.005", "rotation-net learning rate"}},
      {"metric.rate.end", {T::Double, "0.005", "rotation-net rate at the last outer step"}},
      {"metric.update_frequency", {T::Int, "10", "inner updates per rotation update"}},
      {"metric.layers", {T::String, "64,64,64,64", "hidden sizes of the rotation net"}},
      {"metric.batch", {T::Int, "0", "rotation-gradient batch; 0 uses `batch`"}},
      {"eval.interval", {T::Int, "50", "steps between metric-log lines"}},
      {"eval.n", {T::Int, "512", "held-out samples for final evaluation"}},
      {"eval.seed_offset", {T::Int, "1000", "seed offset for held-out evaluation data"}},
      {"checkpoint.interval", {T::Int, "500", "steps between checkpoints"}},
      {"finetune.steps", {T::Int, "100", "spline fine-tune steps for reported costs"}},
      {"paths.resolution", {T::Int, "64", "samples per exported path"}},
      {"alignment.grid", {T::Int, "20", "alignment evaluation grid size per axis"}},
  };
  return s;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const auto& [key, entry] : schema()) cfg.values_[key] = entry.default_value;
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = schema().find(key);
  if (it == schema().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  switch (it->second.type) {
    case Type::Int: {
      try {
        size_t pos = 0;
        (void)std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::invalid_argument("config key '" + key + "' expects an integer, got '" +
                                    value + "'");
      }
      break;
    }
    case Type::Double: {
      try {
        size_t pos = 0;
        (void)std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::invalid_argument("config key '" + key + "' expects a number, got '" + value +
                                    "'");
      }
      break;
    }
    case Type::String:
      break;
  }
  values_[key] = value;
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    size_t eq = a.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override '" + a + "' is not of the form key=value");
    set(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
  }
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg = defaults();
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " is not 'key = value': " + line);
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const { return std::stoi(get(key)); }
double RunConfig::get_double(const std::string& key) const { return std::stod(get(key)); }
uint64_t RunConfig::get_u64(const std::string& key) const {
  return static_cast<uint64_t>(std::stoll(get(key)));
}

std::vector<int> RunConfig::get_layers(const std::string& key) const {
  std::vector<int> out;
  std::istringstream is(get(key));
  std::string part;
  while (std::getline(is, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    out.push_back(std::stoi(part));
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "' lists no layer sizes");
  return out;
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << " = " << value << "\n";
  return os.str();
}

void RunConfig::write(const std::string& path) const {
  std::ofstream os(path);
  os << serialize();
  if (!os) throw std::runtime_error("cannot write config to " + path);
}

LagrangianSpec RunConfig::lagrangian() const {
  const std::string& kind = get("lagrangian.kind");
  if (kind == "kinetic") return LagrangianSpec::kinetic();
  if (kind.rfind("potential.", 0) == 0) {
    PotentialSpec p;
    std::string which = kind.substr(10);
    if (which == "box") p.kind = PotentialSpec::Kind::Box;
    else if (which == "slit") p.kind = PotentialSpec::Kind::Slit;
    else if (which == "hill") p.kind = PotentialSpec::Kind::Hill;
    else if (which == "well") p.kind = PotentialSpec::Kind::Well;
    else if (which == "gmm") p.kind = PotentialSpec::Kind::Gmm;
    else throw std::invalid_argument("unknown lagrangian.kind '" + kind + "'");
    p.m1 = get_double("lagrangian.m1");
    p.m2 = get_double("lagrangian.m2");
    p.m3 = get_double("lagrangian.m3");
    p.m4 = get_double("lagrangian.m4");
    p.m5 = get_double("lagrangian.m5");
    p.sharpness = get_double("lagrangian.sharpness");
    return LagrangianSpec::with_potential(p);
  }
  if (kind == "metric.circle") return LagrangianSpec::with_metric(MetricField::circle(get_double("metric.eps")));
  if (kind == "metric.mass_splitting")
    return LagrangianSpec::with_metric(MetricField::mass_splitting(get_double("metric.delta")));
  if (kind == "metric.x_paths")
    return LagrangianSpec::with_metric(MetricField::x_paths(get_double("metric.delta")));
  throw std::invalid_argument("unknown lagrangian.kind '" + kind + "'");
}

NlotConfig RunConfig::nlot_config() const {
  NlotConfig cfg;
  cfg.g_hidden = get_layers("g.layers");
  cfg.y_hidden = get_layers("y.layers");
  cfg.predictor_hidden = get_layers("predictor.layers");
  cfg.knots = get_int("knots");
  cfg.quad = get_int("quadrature");
  cfg.batch = get_int("batch");
  cfg.lbfgs.max_iters = get_int("lbfgs.iters");
  cfg.lbfgs.history = get_int("lbfgs.history");
  cfg.lbfgs.armijo_c1 = get_double("lbfgs.c1");
  cfg.lbfgs.backtrack = get_double("lbfgs.backtrack");
  cfg.lbfgs.grad_tol = get_double("lbfgs.tol");
  cfg.g_rate_start = get_double("g.rate.start");
  cfg.g_rate_end = get_double("g.rate.end");
  cfg.y_rate_start = get_double("y.rate.start");
  cfg.y_rate_end = get_double("y.rate.end");
  cfg.predictor_rate = get_double("predictor.rate");
  cfg.leaky_slope = get_double("leaky.slope");
  cfg.steps = get_int("steps");
  cfg.seed = get_u64("seed");
  return cfg;
}

MetricLearnConfig RunConfig::metric_config() const {
  MetricLearnConfig cfg;
  cfg.inner = nlot_config();
  cfg.inner.seed = get_u64("seed") * 101 + 1;
  cfg.rotation_hidden = get_layers("metric.layers");
  cfg.metric_rate = get_double("metric.rate");
  cfg.metric_rate_end = get_double("metric.rate.end");
  cfg.metric_batch = get_int("metric.batch");
  cfg.inner_updates_per_outer = get_int("metric.update_frequency");
  cfg.outer_steps = get_int("steps");
  cfg.seed = get_u64("seed");
  return cfg;
}

}  // namespace lagot
