#include "vrff/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "vrff/checkpoint.hpp"
#include "vrff/metrics.hpp"

namespace vrff {

namespace {

using nlohmann::json;

json eval_json_object(const EvalResult& result) {
  json j;
  j["metric_mean"] = result.metric_mean;
  j["metric_std"] = result.metric_std;
  j["episodes"] = result.episodes;
  j["mode"] = to_string(result.mode);
  return j;
}

}  // namespace

std::string eval_result_json(const EvalResult& result) {
  return eval_json_object(result).dump();
}

TrainOutcome run_train(const RunConfig& config, const std::string& resume_checkpoint) {
  auto started = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);

  Trainer trainer(config.source, config.train, config.seeds);
  if (!resume_checkpoint.empty()) {
    load_checkpoint(resume_checkpoint, trainer, config.config_hash());
  }

  TrainOutcome outcome;
  outcome.metrics_path = config.output_dir + "/metrics.csv";
  outcome.summary_path = config.output_dir + "/summary.json";
  outcome.checkpoint_path = config.output_dir + "/checkpoint.json";

  MetricsWriter metrics(outcome.metrics_path);
  int64_t total = config.train.iterations;
  bool evaluated = false;
  EvalResult last_eval;

  while (trainer.iteration() < total) {
    ElboTerms terms = trainer.step();
    int64_t it = trainer.iteration();
    ++outcome.iterations_run;

    bool log_row = (it % config.log_cadence == 0) || it == total;
    if (log_row) {
      last_eval = trainer.evaluate(config.eval_episodes, config.train.eval_mode);
      evaluated = true;
      IterationRecord rec;
      rec.iteration = it;
      rec.elbo = terms.elbo;
      rec.log_lik = terms.log_lik;
      rec.kl = terms.kl;
      rec.has_eval = true;
      rec.eval_metric = last_eval.metric_mean;
      metrics.append(rec);
    }
    if ((it % config.checkpoint_cadence == 0) || it == total) {
      save_checkpoint(outcome.checkpoint_path, trainer, config);
    }
  }

  if (!evaluated) {
    last_eval = trainer.evaluate(config.eval_episodes, config.train.eval_mode);
    save_checkpoint(outcome.checkpoint_path, trainer, config);
  }
  outcome.final_eval = last_eval;

  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
  json summary;
  summary["config"] = json::parse(config.echo_json());
  summary["config_hash"] = config.config_hash();
  summary["final_eval"] = eval_json_object(last_eval);
  summary["iterations"] = trainer.iteration();
  summary["wall_time_seconds"] = elapsed.count();
  std::ofstream out(outcome.summary_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + outcome.summary_path + "'");
  out << summary.dump(2) << "\n";
  return outcome;
}

std::string run_eval(const RunConfig& config, const std::string& checkpoint_path,
                     int64_t episodes, EvalMode mode) {
  Trainer trainer(config.source, config.train, config.seeds);
  if (!checkpoint_path.empty()) {
    load_checkpoint(checkpoint_path, trainer, config.config_hash());
  } else if (mode != EvalMode::baseline) {
    throw std::invalid_argument("eval needs a checkpoint unless mode is baseline");
  }
  return eval_result_json(trainer.evaluate(episodes, mode));
}

void export_curves(const RunConfig& config, const std::string& checkpoint_path,
                   uint64_t task_index, int64_t grid_points, EvalMode mode,
                   const std::string& out_path) {
  const auto* sine = std::get_if<SineEpisodes>(&config.source);
  if (sine == nullptr) {
    throw std::invalid_argument("curve export is defined for sine tasks only");
  }
  if (grid_points < 1) throw std::invalid_argument("grid must have at least 1 point");
  if (task_index >= static_cast<uint64_t>(config.eval_episodes)) {
    throw std::invalid_argument(
        "task index " + std::to_string(task_index) + " out of range (eval set has " +
        std::to_string(config.eval_episodes) + " tasks)");
  }

  Trainer trainer(config.source, config.train, config.seeds);
  if (!checkpoint_path.empty()) {
    load_checkpoint(checkpoint_path, trainer, config.config_hash());
  } else if (mode != EvalMode::baseline) {
    throw std::invalid_argument("curve export needs a checkpoint unless mode is baseline");
  }

  Task task = trainer.eval_task(task_index);
  SineCurve curve = sine_curve_of(sine->spec, trainer.eval_task_seed(task_index));

  int64_t n_s = task.support_count();
  int64_t n_q = task.query_count();
  Tensor points(std::vector<int64_t>{n_s + n_q + grid_points, 1});
  for (int64_t i = 0; i < n_s; ++i) points.at(i, 0) = task.support_x.at(i, 0);
  for (int64_t i = 0; i < n_q; ++i) points.at(n_s + i, 0) = task.query_x.at(i, 0);
  double lo = sine->spec.input_lo, hi = sine->spec.input_hi;
  for (int64_t i = 0; i < grid_points; ++i) {
    double x = grid_points == 1
                   ? lo
                   : lo + (hi - lo) * static_cast<double>(i) /
                             static_cast<double>(grid_points - 1);
    points.at(n_s + n_q + i, 0) = x;
  }

  Tensor predictions;
  if (mode == EvalMode::baseline) {
    predictions = baseline_predict_points(task, config.train.elbo(),
                                          trainer.eval_sampling_seed(task_index), points);
  } else {
    EpisodeNoise noise = trainer.eval_noise(task_index, mode);
    predictions = predict_points(trainer.model(), task, config.train.elbo(), noise, points);
  }

  struct Row {
    double x, y_true, y_pred;
    int is_support;
  };
  std::vector<Row> rows;
  rows.reserve(static_cast<size_t>(points.rows()));
  for (int64_t i = 0; i < n_s; ++i) {
    rows.push_back({task.support_x.at(i, 0), task.support_y.at(i, 0),
                    predictions.at(i, 0), 1});
  }
  for (int64_t i = 0; i < n_q; ++i) {
    rows.push_back({task.query_x.at(i, 0), task.query_y.at(i, 0),
                    predictions.at(n_s + i, 0), 0});
  }
  for (int64_t i = 0; i < grid_points; ++i) {
    double x = points.at(n_s + n_q + i, 0);
    rows.push_back({x, curve.amplitude * std::sin(x + curve.phase),
                    predictions.at(n_s + n_q + i, 0), 0});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.x < b.x; });

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << "x,y_true,y_pred,is_support\n";
  for (const Row& row : rows) {
    out << format_double(row.x) << ',' << format_double(row.y_true) << ','
        << format_double(row.y_pred) << ',' << row.is_support << '\n';
  }
  if (!out) throw std::runtime_error("write failed on '" + out_path + "'");
}

}  // namespace vrff
