#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vrff/config.hpp"
#include "vrff/harness.hpp"

namespace {

vrff::RunConfig load_config(const std::string& path,
                            const std::vector<std::string>& seed_overrides) {
  vrff::RunConfig config = vrff::load_run_config(path);
  for (const std::string& kv : seed_overrides) {
    vrff::apply_seed_override(config, kv);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned kernels via variational random features"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::vector<std::string> seed_overrides;
  std::string mode_name = "mean";
  int64_t episodes = -1;  // unset: use the config's eval_episodes
  uint64_t task_index = 0;
  int64_t grid_points = 200;
  std::string output_path;

  CLI::App* train = app.add_subcommand("train", "Run episodic meta-training");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--checkpoint", checkpoint_path, "Resume from this checkpoint");
  train->add_option("--seed-override", seed_overrides,
                    "Override a seed, e.g. tasks=7 (repeatable)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out tasks");
  eval->add_option("--config", config_path, "Run config JSON")->required();
  eval->add_option("--checkpoint", checkpoint_path,
                   "Checkpoint to evaluate (optional in baseline mode)");
  eval->add_option("--episodes", episodes, "Eval episode count (default: config)");
  eval->add_option("--mode", mode_name, "sampled | mean | baseline")
      ->capture_default_str();
  eval->add_option("--seed-override", seed_overrides,
                   "Override a seed, e.g. tasks=7 (repeatable)");

  CLI::App* curves =
      app.add_subcommand("export-curves", "Dump one eval task's prediction curve as CSV");
  curves->add_option("--config", config_path, "Run config JSON")->required();
  curves->add_option("--checkpoint", checkpoint_path,
                     "Checkpoint to predict with (optional in baseline mode)");
  curves->add_option("--task", task_index, "Eval task index")->required();
  curves->add_option("--grid", grid_points, "Grid point count")->capture_default_str();
  curves->add_option("--mode", mode_name, "sampled | mean | baseline")
      ->capture_default_str();
  curves->add_option("--output", output_path,
                     "Output CSV path (default: <output_dir>/curves_task<N>.csv)");
  curves->add_option("--seed-override", seed_overrides,
                     "Override a seed, e.g. tasks=7 (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) {
      vrff::RunConfig config = load_config(config_path, seed_overrides);
      vrff::TrainOutcome outcome = vrff::run_train(config, checkpoint_path);
      std::cout << "iterations: " << outcome.iterations_run << "\n"
                << "final eval: " << vrff::eval_result_json(outcome.final_eval) << "\n"
                << "metrics: " << outcome.metrics_path << "\n"
                << "checkpoint: " << outcome.checkpoint_path << "\n"
                << "summary: " << outcome.summary_path << "\n";
      return 0;
    }
    if (eval->parsed()) {
      vrff::RunConfig config = load_config(config_path, seed_overrides);
      vrff::EvalMode mode = vrff::eval_mode_from_string(mode_name);
      int64_t count = config.eval_episodes;
      if (eval->count("--episodes") > 0) {
        if (episodes < 1) {
          throw std::invalid_argument("--episodes must be a positive count");
        }
        count = episodes;
      }
      std::cout << vrff::run_eval(config, checkpoint_path, count, mode) << "\n";
      return 0;
    }
    vrff::RunConfig config = load_config(config_path, seed_overrides);
    vrff::EvalMode mode = vrff::eval_mode_from_string(mode_name);
    std::string out = output_path.empty()
                          ? config.output_dir + "/curves_task" +
                                std::to_string(task_index) + ".csv"
                          : output_path;
    vrff::export_curves(config, checkpoint_path, task_index, grid_points, mode, out);
    std::cout << "curves: " << out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
