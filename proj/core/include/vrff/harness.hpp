#pragma once

#include <cstdint>
#include <string>

#include "vrff/config.hpp"
#include "vrff/trainer.hpp"

namespace vrff {

struct TrainOutcome {
  std::string metrics_path;
  std::string summary_path;
  std::string checkpoint_path;
  EvalResult final_eval;
  int64_t iterations_run = 0;
};

/// Full training run per the config: metrics.csv rows at the log cadence
/// (and at the final iteration), a rolling checkpoint.{json,bin} at the
/// checkpoint cadence, and summary.json at the end. Pass a checkpoint path
/// to resume; metrics keep appending to the same file.
TrainOutcome run_train(const RunConfig& config, const std::string& resume_checkpoint);

/// Loads the checkpoint (unless baseline mode with an empty path, which
/// needs no model) and evaluates `episodes` eval-stream tasks. Returns the
/// result as a single JSON line.
std::string run_eval(const RunConfig& config, const std::string& checkpoint_path,
                     int64_t episodes, EvalMode mode);

/// Writes one eval task's prediction curve (sine tasks only) as CSV with
/// columns x,y_true,y_pred,is_support: support and query rows plus a dense
/// grid over the input range, sorted by x. Queries and grid carry
/// is_support=0; grid y_true is the noise-free ground-truth curve.
void export_curves(const RunConfig& config, const std::string& checkpoint_path,
                   uint64_t task_index, int64_t grid_points, EvalMode mode,
                   const std::string& out_path);

std::string eval_result_json(const EvalResult& result);

}  // namespace vrff
