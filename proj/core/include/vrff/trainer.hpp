#pragma once

#include <cstdint>
#include <vector>

#include "vrff/adam.hpp"
#include "vrff/elbo.hpp"
#include "vrff/networks.hpp"
#include "vrff/tasks.hpp"

namespace vrff {

/// The three independent randomness roots of a run: task sampling, parameter
/// initialization, and the stochastic objective (frequency noise + phases).
struct Seeds {
  uint64_t tasks = 1;
  uint64_t init = 2;
  uint64_t sampling = 3;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int64_t iterations = 20000;
  int episodes_per_iteration = 6;
  int64_t basis_count = 256;
  double ridge = 1e-3;
  double kl_weight = 1.0;
  double likelihood_noise = 0.1;
  RecurrentMode mode = RecurrentMode::vanilla_lstm;
  int64_t feature_width = 40;
  int64_t hidden_width = 40;
  PriorAggregation prior_aggregation = PriorAggregation::average_parameters;
  EvalMode eval_mode = EvalMode::mean;

  void validate() const;
  ElboConfig elbo() const;
};

/// Batch-mean objective readouts of one training iteration (1-based).
struct IterationRecord {
  int64_t iteration = 0;
  double elbo = 0.0;
  double log_lik = 0.0;
  double kl = 0.0;
  bool has_eval = false;
  double eval_metric = 0.0;
};

struct EvalResult {
  double metric_mean = 0.0;
  double metric_std = 0.0;
  int64_t episodes = 0;
  EvalMode mode = EvalMode::mean;
};

/// Owns the model, optimizer, and episode bookkeeping of one training run.
///
/// Episode indices, not generator states, drive all sampling: training task
/// i and its objective noise depend only on (seeds, i), so a run can resume
/// from (parameters, moments, episode counter) alone. Evaluation draws from
/// streams disjoint from training by construction.
class Trainer {
public:
  Trainer(EpisodeSource source, TrainConfig cfg, Seeds seeds);

  /// One meta-batch: accumulates -elbo over episodes_per_iteration episodes,
  /// applies one optimizer step. Recurrent state threads through the batch
  /// and resets between batches. Throws NonFiniteError naming the iteration
  /// if the loss is not finite.
  ElboTerms step();

  EvalResult evaluate(int64_t episodes, EvalMode mode) const;

  /// Eval-stream task by index with its eval-mode noise; used by curve export
  /// so exported predictions match evaluate() exactly.
  Task eval_task(uint64_t index) const;
  uint64_t eval_task_seed(uint64_t index) const;
  EpisodeNoise eval_noise(uint64_t index, EvalMode mode) const;
  uint64_t eval_sampling_seed(uint64_t index) const;

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  AdamState& optimizer() { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  const Seeds& seeds() const { return seeds_; }
  const EpisodeSource& source() const { return source_; }
  int64_t iteration() const { return iteration_; }
  uint64_t episode_counter() const { return episode_counter_; }

  /// Checkpoint restore: counters only; parameters and moments are written
  /// in place by the checkpoint loader.
  void restore_counters(int64_t iteration, uint64_t episode_counter);

private:
  EpisodeSource source_;
  TrainConfig cfg_;
  Seeds seeds_;
  Model model_;
  AdamState adam_;
  int64_t iteration_ = 0;
  uint64_t episode_counter_ = 0;
};

/// Runs `iterations` steps, recording every iteration. Convenience wrapper
/// for tests and acceptance runs; the CLI loop drives step() itself.
std::vector<IterationRecord> meta_train(Trainer& trainer, int64_t iterations);

}  // namespace vrff
