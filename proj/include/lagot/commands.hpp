#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lagot {

// Command implementations behind the CLI. Exit codes: 0 success, 1 runtime
// failure, 2 usage error. Diagnostics go to stderr.

struct GenDataOptions {
  std::string setting;
  int n = 0;  // 0: per-dataset default
  uint64_t seed = 0;
  std::string out;
};
int cmd_gen_data(const GenDataOptions& opts);

struct TrainOptions {
  std::string config_file;             // optional; defaults otherwise
  std::vector<std::string> overrides;  // key=value
  std::string data_dir;
  std::string out_dir;
  std::string resume_dir;  // continue a previous run when set
};
int cmd_train(const TrainOptions& opts);
int cmd_train_metric(const TrainOptions& opts);

struct EvalOptions {
  std::string run_dir;
};
int cmd_eval(const EvalOptions& opts);

struct ExportPathsOptions {
  std::string run_dir;
  std::string out_file;
  int pairs = 16;
};
int cmd_export_paths(const ExportPathsOptions& opts);

struct PlotOptions {
  std::string run_dir;
  std::string out_file;
};
int cmd_plot(const PlotOptions& opts);

}  // namespace lagot
