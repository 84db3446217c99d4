#include "lagot/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "lagot/config.hpp"
#include "lagot/metric_learn.hpp"
#include "lagot/nlot.hpp"
#include "lagot/plot.hpp"

namespace lagot {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Exclusive ownership of a run directory for the lifetime of the command.
struct RunLock {
  fs::path path;
  bool held = false;

  explicit RunLock(const fs::path& dir) : path(dir / ".lock") {
    if (fs::exists(path))
      throw std::runtime_error("run directory is locked by another process: " + path.string());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot create lock file " + path.string());
    held = true;
  }
  ~RunLock() {
    if (held) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }
};

void append_jsonl(const fs::path& file, const json& obj) {
  std::ofstream os(file, std::ios::app);
  os << obj.dump() << "\n";
  if (!os) throw std::runtime_error("cannot append to " + file.string());
}

void write_json(const fs::path& file, const json& obj) {
  std::ofstream os(file);
  os << obj.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write " + file.string());
}

json read_json(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  return json::parse(is);
}

struct LoadedRun {
  RunConfig config;
  json meta;  // run.json
  fs::path dir;
  LoadedRun() : config(RunConfig::defaults()) {}
};

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  run.dir = run_dir;
  if (!fs::exists(run.dir / "config.resolved"))
    throw std::runtime_error("no config.resolved in " + run_dir);
  run.config = RunConfig::from_file((run.dir / "config.resolved").string());
  run.meta = read_json(run.dir / "run.json");
  return run;
}

// Held-out measures for evaluation: the generator spec from the manifest with
// a shifted seed.
std::vector<EmpiricalMeasure> eval_measures(const RunConfig& cfg, const json& meta) {
  DatasetSpec spec;
  spec.name = meta.at("dataset").at("name").get<std::string>();
  spec.samples = cfg.get_int("eval.n");
  spec.seed = meta.at("dataset").at("seed").get<uint64_t>() +
              static_cast<uint64_t>(cfg.get_int("eval.seed_offset"));
  return generate(spec);
}

json eval_transport_run(const LoadedRun& run, const NlotState& state) {
  LagrangianSpec L = run.config.lagrangian();
  auto held_out = eval_measures(run.config, run.meta);
  if (held_out.size() < 2) throw std::runtime_error("evaluation dataset has no target measure");
  auto pushed = push_forward(state, L, held_out[0]);
  double w2 = w2_marginal_error(pushed, held_out[1]);
  return json{{"w2_error", w2}, {"eval_n", held_out[0].size()}};
}

json eval_metric_run(const LoadedRun& run, const MetricLearnState& state,
                     const std::vector<EmpiricalMeasure>& measures) {
  json out;
  const std::string name = run.meta.at("dataset").at("name").get<std::string>();
  int grid_n = run.config.get_int("alignment.grid");
  auto grid = evaluation_grid(bounding_box(measures), grid_n, grid_n, 0.1);
  if (is_metric_dataset(name)) {
    double score = alignment_score(ground_truth_metric(name),
                                   MetricField::learned(state.rotation_net), grid);
    out["alignment_score"] = score;
  }
  return out;
}

void dump_metric_csv(const fs::path& file, const MetricField& m,
                     const std::vector<double>& grid) {
  std::ofstream os(file);
  os << "x1,x2,a11,a12,a22\n";
  char buf[64];
  for (size_t i = 0; i < grid.size(); i += 2) {
    std::array<double, 2> x{grid[i], grid[i + 1]};
    auto a = metric_value(m, x);
    double row[5] = {x[0], x[1], a[0], a[1], a[3]};
    for (int k = 0; k < 5; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", row[k]);
      os << (k ? "," : "") << buf;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("cannot write " + file.string());
}

int usage_error(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return 2;
}

int runtime_error_exit(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const GenDataOptions& opts) {
  const auto& names = dataset_names();
  if (std::find(names.begin(), names.end(), opts.setting) == names.end()) {
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    return usage_error("unknown setting '" + opts.setting + "'; valid settings: " + valid);
  }
  if (opts.out.empty()) return usage_error("--out is required");
  if (opts.n < 0) return usage_error("--n must be nonnegative");
  try {
    DatasetSpec spec{opts.setting, opts.n, opts.seed};
    auto measures = generate(spec);
    write_dataset(opts.out, spec, measures);
    std::cout << (fs::path(opts.out) / "manifest.json").string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

// ---------------------------------------------------------------------------
// train / train-metric
// ---------------------------------------------------------------------------

namespace {

struct TrainSetup {
  RunConfig config;
  fs::path out_dir;
  fs::path data_dir;
  std::vector<EmpiricalMeasure> measures;
  DatasetSpec dataset;
  bool resuming = false;
  TrainSetup() : config(RunConfig::defaults()) {}
};

// Loads config and data for train/train-metric, creating or reopening the run
// directory. Throws invalid_argument for usage problems.
TrainSetup prepare_training(const TrainOptions& opts, const char* command) {
  TrainSetup setup;
  if (!opts.resume_dir.empty()) {
    setup.resuming = true;
    setup.out_dir = opts.resume_dir;
    LoadedRun run = load_run(opts.resume_dir);
    if (run.meta.at("command").get<std::string>() != command)
      throw std::invalid_argument("run directory was produced by a different command");
    setup.config = run.config;
    setup.data_dir = run.meta.at("data_dir").get<std::string>();
  } else {
    if (opts.out_dir.empty()) throw std::invalid_argument("--out is required");
    if (opts.data_dir.empty()) throw std::invalid_argument("--data is required");
    setup.out_dir = opts.out_dir;
    setup.data_dir = opts.data_dir;
    setup.config =
        opts.config_file.empty() ? RunConfig::defaults() : RunConfig::from_file(opts.config_file);
    setup.config.apply_overrides(opts.overrides);
  }
  if (!fs::exists(setup.data_dir / "manifest.json"))
    throw std::invalid_argument("no dataset at " + setup.data_dir.string() +
                                " (run gen-data first)");
  setup.measures = load_dataset(setup.data_dir.string(), &setup.dataset);
  return setup;
}

void init_run_dir(const TrainSetup& setup, const char* command) {
  fs::create_directories(setup.out_dir);
  setup.config.write((setup.out_dir / "config.resolved").string());
  json meta{{"command", command},
            {"data_dir", setup.data_dir.string()},
            {"dataset",
             {{"name", setup.dataset.name}, {"n", setup.dataset.samples},
              {"seed", setup.dataset.seed}}}};
  write_json(setup.out_dir / "run.json", meta);
}

}  // namespace

int cmd_train(const TrainOptions& opts) {
  TrainSetup setup;
  try {
    setup = prepare_training(opts, "train");
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
  try {
    if (setup.measures.size() < 2)
      throw std::runtime_error("training needs a source and a target measure");
    fs::create_directories(setup.out_dir);
    RunLock lock(setup.out_dir);
    if (!setup.resuming) init_run_dir(setup, "train");

    NlotConfig cfg = setup.config.nlot_config();
    LagrangianSpec L = setup.config.lagrangian();
    std::string ckpt = (setup.out_dir / "checkpoint.latest").string();
    NlotState state = setup.resuming ? load_nlot_state(ckpt, cfg) : NlotState::create(cfg);

    TrainLogEntry last{};
    TrainHooks hooks;
    hooks.log_interval = setup.config.get_int("eval.interval");
    hooks.on_log = [&](const TrainLogEntry& e) {
      last = e;
      append_jsonl(setup.out_dir / "metrics.jsonl",
                   json{{"step", e.step},
                        {"dual_loss", e.dual_loss},
                        {"mean_conjugate_residual", e.mean_conjugate_residual},
                        {"mean_path_energy", e.mean_path_energy}});
    };
    hooks.checkpoint_interval = setup.config.get_int("checkpoint.interval");
    hooks.on_checkpoint = [&](const NlotState& s) { save_nlot_state(s, ckpt); };

    train_nlot_loop(state, setup.measures[0], setup.measures[1], L, hooks);
    save_nlot_state(state, ckpt);

    if (cfg.steps > 0) {
      LoadedRun run = load_run(setup.out_dir.string());
      json summary{{"steps", state.step},
                   {"dual_loss", last.dual_loss},
                   {"mean_conjugate_residual", last.mean_conjugate_residual},
                   {"mean_path_energy", last.mean_path_energy}};
      summary.update(eval_transport_run(run, state));
      write_json(setup.out_dir / "metrics.json", summary);
    }
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

int cmd_train_metric(const TrainOptions& opts) {
  TrainSetup setup;
  try {
    setup = prepare_training(opts, "train-metric");
  } catch (const std::invalid_argument& e) {
    return usage_error(e.what());
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
  try {
    if (setup.measures.size() < 2)
      throw std::runtime_error("metric learning needs at least two measures");
    fs::create_directories(setup.out_dir);
    RunLock lock(setup.out_dir);
    if (!setup.resuming) init_run_dir(setup, "train-metric");

    MetricLearnConfig cfg = setup.config.metric_config();
    int pairs = static_cast<int>(setup.measures.size()) - 1;
    std::string ckpt = (setup.out_dir / "checkpoint.latest").string();
    MetricLearnState state = setup.resuming ? load_metric_state(ckpt, cfg, pairs)
                                            : MetricLearnState::create(cfg, pairs);

    int grid_n = setup.config.get_int("alignment.grid");
    auto grid = evaluation_grid(bounding_box(setup.measures), grid_n, grid_n, 0.1);
    bool has_gt = is_metric_dataset(setup.dataset.name);

    MetricTrainLogEntry last{};
    MetricTrainHooks hooks;
    hooks.log_interval = setup.config.get_int("eval.interval");
    hooks.on_log = [&](const MetricTrainLogEntry& e) {
      last = e;
      json line{{"outer_step", e.outer_step},
                {"mean_dual_loss", e.mean_dual_loss},
                {"mean_path_energy", e.mean_path_energy},
                {"pair_dual_losses", e.pair_dual_losses}};
      if (has_gt)
        line["alignment_score"] = alignment_score(ground_truth_metric(setup.dataset.name),
                                                  MetricField::learned(state.rotation_net), grid);
      append_jsonl(setup.out_dir / "metrics.jsonl", line);
    };
    hooks.checkpoint_interval = setup.config.get_int("checkpoint.interval");
    hooks.on_checkpoint = [&](const MetricLearnState& s) { save_metric_state(s, ckpt); };

    train_metric_loop(state, setup.measures, hooks);
    save_metric_state(state, ckpt);
    dump_metric_csv(setup.out_dir / "metric.csv", MetricField::learned(state.rotation_net), grid);

    if (cfg.outer_steps > 0) {
      json summary{{"outer_steps", state.outer_step},
                   {"mean_dual_loss", last.mean_dual_loss},
                   {"mean_path_energy", last.mean_path_energy}};
      if (has_gt)
        summary["alignment_score"] = alignment_score(
            ground_truth_metric(setup.dataset.name), MetricField::learned(state.rotation_net),
            grid);
      write_json(setup.out_dir / "metrics.json", summary);
    }
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const EvalOptions& opts) {
  if (opts.run_dir.empty()) return usage_error("--run is required");
  try {
    LoadedRun run = load_run(opts.run_dir);
    std::string command = run.meta.at("command").get<std::string>();
    std::string ckpt = (run.dir / "checkpoint.latest").string();
    json results;
    if (command == "train") {
      if (!fs::exists(ckpt + ".manifest.txt"))
        throw std::runtime_error("no checkpoint in " + opts.run_dir);
      NlotState state = load_nlot_state(ckpt, run.config.nlot_config());
      results = eval_transport_run(run, state);
    } else {
      auto measures = load_dataset(run.meta.at("data_dir").get<std::string>());
      if (!fs::exists(ckpt + ".rotation.manifest.txt"))
        throw std::runtime_error("no checkpoint in " + opts.run_dir);
      MetricLearnState state = load_metric_state(ckpt, run.config.metric_config(),
                                                 static_cast<int>(measures.size()) - 1);
      results = eval_metric_run(run, state, measures);
    }
    json merged = fs::exists(run.dir / "metrics.json") ? read_json(run.dir / "metrics.json")
                                                       : json::object();
    merged.update(results);
    write_json(run.dir / "metrics.json", merged);
    std::cout << merged.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

// ---------------------------------------------------------------------------
// export-paths
// ---------------------------------------------------------------------------

int cmd_export_paths(const ExportPathsOptions& opts) {
  if (opts.run_dir.empty() || opts.out_file.empty())
    return usage_error("--run and --out are required");
  if (opts.pairs < 1) return usage_error("--pairs must be positive");
  try {
    LoadedRun run = load_run(opts.run_dir);
    if (run.meta.at("command").get<std::string>() != "train")
      throw std::runtime_error("export-paths expects a transport run directory");
    std::string ckpt = (run.dir / "checkpoint.latest").string();
    if (!fs::exists(ckpt + ".manifest.txt"))
      throw std::runtime_error("no checkpoint in " + opts.run_dir);
    NlotState state = load_nlot_state(ckpt, run.config.nlot_config());
    LagrangianSpec L = run.config.lagrangian();

    auto held_out = eval_measures(run.config, run.meta);
    int count = std::min(opts.pairs, held_out[0].size());
    int fine_tune = run.config.get_int("finetune.steps");
    std::vector<PathSpline> paths;
    paths.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      auto x = held_out[0].point(i);
      auto res = c_transform_solve(state, L, x);
      paths.push_back(
          displacement_cost(L, x, res.y_hat, state.predictor, fine_tune, 1e-2,
                            {state.config.quad})
              .path);
    }
    std::vector<std::pair<int, const PathSpline*>> rows;
    for (int i = 0; i < count; ++i) rows.push_back({i, &paths[static_cast<size_t>(i)]});
    std::ofstream os(opts.out_file);
    export_paths_csv(os, rows, run.config.get_int("paths.resolution"));
    if (!os) throw std::runtime_error("cannot write " + opts.out_file);
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

int cmd_plot(const PlotOptions& opts) {
  if (opts.run_dir.empty() || opts.out_file.empty())
    return usage_error("--run and --out are required");
  try {
    LoadedRun run = load_run(opts.run_dir);
    std::string command = run.meta.at("command").get<std::string>();
    std::string ckpt = (run.dir / "checkpoint.latest").string();
    auto measures = load_dataset(run.meta.at("data_dir").get<std::string>());

    PlotData data;
    std::string svg;
    if (command == "train") {
      NlotState state = load_nlot_state(ckpt, run.config.nlot_config());
      LagrangianSpec L = run.config.lagrangian();
      EmpiricalMeasure source = measures[0], target = measures[1];
      int cap = std::min(source.size(), 400);
      EmpiricalMeasure source_cap;
      for (int i = 0; i < cap; ++i) source_cap.push_back(source.point(i));
      EmpiricalMeasure pushed = push_forward(state, L, source_cap);

      int n_paths = std::min(24, source_cap.size());
      std::vector<PathSpline> paths;
      for (int i = 0; i < n_paths; ++i) {
        auto x = source_cap.point(i);
        paths.push_back(displacement_cost(L, x, pushed.point(i), state.predictor,
                                          run.config.get_int("finetune.steps"), 1e-2,
                                          {state.config.quad})
                            .path);
      }
      std::vector<EmpiricalMeasure> all{source, target, pushed};
      data.box = bounding_box(all);
      data.source = &source;
      data.target = &target;
      data.pushed = &pushed;
      for (const auto& p : paths) data.paths.push_back(&p);
      if (L.kind == LagrangianSpec::Kind::KineticMinusPotential) data.potential = &L.potential;
      if (L.kind == LagrangianSpec::Kind::Metric) data.metric = &L.metric;
      svg = render_svg(data);
    } else {
      MetricLearnState state = load_metric_state(ckpt, run.config.metric_config(),
                                                 static_cast<int>(measures.size()) - 1);
      EmpiricalMeasure all_points;
      for (const auto& m : measures)
        for (int i = 0; i < m.size(); ++i) all_points.push_back(m.point(i));
      data.box = bounding_box(measures);
      data.source = &all_points;
      MetricField learned = MetricField::learned(state.rotation_net);
      data.metric = &learned;
      svg = render_svg(data);
    }
    std::ofstream os(opts.out_file);
    os << svg;
    if (!os) throw std::runtime_error("cannot write " + opts.out_file);
    return 0;
  } catch (const std::exception& e) {
    return runtime_error_exit(e);
  }
}

}  // namespace lagot
