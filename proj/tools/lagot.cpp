#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lagot/commands.hpp"

// Commands: gen-data, train, train-metric, eval, export-paths, plot.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int main(int argc, char** argv) {
  CLI::App app{"Lagrangian optimal transport toolkit"};
  app.require_subcommand(1);

  lagot::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  gen_cmd->add_option("--setting", gen.setting, "dataset name")->required();
  gen_cmd->add_option("--n", gen.n, "samples per measure (0 = default)");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  lagot::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a transport map between two measures");
  train_cmd->add_option("--config", train.config_file, "config file (key = value lines)");
  train_cmd->add_option("--set", train.overrides, "override a config key (key=value)");
  train_cmd->add_option("--data", train.data_dir, "dataset directory");
  train_cmd->add_option("--out", train.out_dir, "run directory to create");
  train_cmd->add_option("--resume", train.resume_dir, "existing run directory to continue");

  lagot::TrainOptions train_metric;
  auto* tm_cmd = app.add_subcommand("train-metric", "learn a metric from a measure sequence");
  tm_cmd->add_option("--config", train_metric.config_file, "config file");
  tm_cmd->add_option("--set", train_metric.overrides, "override a config key (key=value)");
  tm_cmd->add_option("--data", train_metric.data_dir, "dataset directory");
  tm_cmd->add_option("--out", train_metric.out_dir, "run directory to create");
  tm_cmd->add_option("--resume", train_metric.resume_dir, "existing run directory to continue");

  lagot::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a finished run");
  eval_cmd->add_option("--run", eval.run_dir, "run directory")->required();

  lagot::ExportPathsOptions paths;
  auto* paths_cmd = app.add_subcommand("export-paths", "write transport paths as CSV");
  paths_cmd->add_option("--run", paths.run_dir, "run directory")->required();
  paths_cmd->add_option("--out", paths.out_file, "output CSV file")->required();
  paths_cmd->add_option("--pairs", paths.pairs, "number of paths to export");

  lagot::PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plot", "render a run as a static SVG figure");
  plot_cmd->add_option("--run", plot.run_dir, "run directory")->required();
  plot_cmd->add_option("--out", plot.out_file, "output SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (gen_cmd->parsed()) return lagot::cmd_gen_data(gen);
  if (train_cmd->parsed()) return lagot::cmd_train(train);
  if (tm_cmd->parsed()) return lagot::cmd_train_metric(train_metric);
  if (eval_cmd->parsed()) return lagot::cmd_eval(eval);
  if (paths_cmd->parsed()) return lagot::cmd_export_paths(paths);
  if (plot_cmd->parsed()) return lagot::cmd_plot(plot);
  return 2;
}
