#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrff/graph.hpp"
#include "vrff/networks.hpp"
#include "vrff/random_features.hpp"
#include "vrff/tasks.hpp"

namespace vrff {

/// How per-query priors collapse into the episode's KL term: average the
/// prior parameters into one prior (default), or average the per-query KLs.
enum class PriorAggregation { average_parameters, average_kl };

enum class EvalMode { sampled, mean, baseline };

const char* to_string(PriorAggregation agg);
PriorAggregation prior_aggregation_from_string(const std::string& name);
const char* to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

struct ElboConfig {
  int64_t basis_count = 256;
  double ridge = 1e-3;
  double kl_weight = 1.0;        // beta
  double likelihood_noise = 0.1; // sigma_y, regression only
  PriorAggregation prior_aggregation = PriorAggregation::average_parameters;
};

/// Scalar readouts of one episode objective; elbo is log_lik - beta*kl by
/// construction (same arithmetic as the graph).
struct ElboTerms {
  double elbo = 0.0;
  double log_lik = 0.0;
  double kl = 0.0;
  double beta = 1.0;
};

/// Analytic KL between diagonal Gaussians given as (mean, log-variance)
/// pairs of identical shape, summed over every entry.
Var gaussian_kl(GaussianVars q, GaussianVars p);
/// Per-row KL (n x 1) for row-aligned diagonal Gaussians.
Var gaussian_kl_rows(GaussianVars q, GaussianVars p);
/// Scalar closed form for one dimension; rejects non-positive variances.
double gaussian_kl_value(double mean_q, double var_q, double mean_p, double var_p);

/// Gaussian query log density sum_i [-log(2 pi s^2)/2 - (y_i - yhat_i)^2/(2 s^2)]
/// over all entries; rejects noise_std <= 0.
Var gaussian_log_likelihood(Var predictions, const Tensor& targets, double noise_std);
/// Sum over rows of log softmax(logits) at the one-hot target entry.
Var categorical_log_likelihood(Var logits, const Tensor& one_hot_targets);

/// Fixed per-episode randomness: the frequency noise draw and the feature
/// phases. Mean mode zeroes epsilon but keeps the phases of the same seed.
struct EpisodeNoise {
  Tensor epsilon;  // basis_count x d
  Tensor phases;   // 1 x basis_count
};
EpisodeNoise draw_episode_noise(int64_t basis_count, int64_t feature_width,
                                uint64_t seed, bool zero_epsilon);

struct EpisodeOutput {
  Var elbo;         // scalar, to be maximized
  Var log_lik;      // scalar
  Var kl;           // scalar
  Var predictions;  // n_q x d_out
  LstmStateVars state;  // carried recurrent state after this episode
};

/// Graph pieces shared by the posterior and prior paths of one episode.
struct EpisodeParts {
  Var support_features;  // n_s x d embedded
  Var query_features;    // n_q x d embedded
  Var pooled_support;    // ways x d
  Var aggregated;        // 1 x d inference input
};

EpisodeParts prepare_episode(Binder& bind, const Model& model, const Task& task);

/// Completes the objective once the posterior is known (the bidirectional
/// mode computes posteriors for the whole sequence first).
EpisodeOutput finish_episode(Binder& bind, const Model& model, const Task& task,
                             const ElboConfig& cfg, const EpisodeNoise& noise,
                             const EpisodeParts& parts, GaussianVars posterior,
                             LstmStateVars state_after);

/// Single episode with carried recurrent state (vanilla / no-lstm modes).
EpisodeOutput episode_elbo(Binder& bind, const Model& model, const Task& task,
                           const ElboConfig& cfg, const EpisodeNoise& noise,
                           LstmStateVars carried);

struct BatchOutput {
  Var loss;  // scalar: sum over episodes of -elbo
  std::vector<EpisodeOutput> episodes;
};

/// One meta-batch objective. Vanilla mode threads LSTM state across the
/// episodes in order; bidirectional mode runs over the whole sequence both
/// ways; no-lstm treats episodes independently.
BatchOutput batch_elbo(Binder& bind, const Model& model, const std::vector<Task>& tasks,
                       const ElboConfig& cfg, const std::vector<EpisodeNoise>& noise);

ElboTerms extract_terms(const EpisodeOutput& out, double beta);

/// Query-set score of one episode: mean squared error for regression,
/// argmax accuracy for classification.
double episode_metric(const Task& task, const Tensor& predictions, bool classification);

/// Predictions at arbitrary input points from the posterior inferred on the
/// task's support set, starting from a fresh recurrent state. Prediction
/// rows depend only on their own input row, so these values agree with the
/// query predictions inside episode_elbo for points == task.query_x.
Tensor predict_points(const Model& model, const Task& task, const ElboConfig& cfg,
                      const EpisodeNoise& noise, const Tensor& points);

/// Fixed-prior random-feature predictions on raw inputs (no networks):
/// frequencies ~ N(0, I), phases uniform, same base learner.
Tensor baseline_predict_points(const Task& task, const ElboConfig& cfg, uint64_t seed,
                               const Tensor& points);
Tensor baseline_predictions(const Task& task, const ElboConfig& cfg, uint64_t seed);

}  // namespace vrff
