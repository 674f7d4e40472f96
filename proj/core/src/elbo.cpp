#include "vrff/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrff {

const char* to_string(PriorAggregation agg) {
  switch (agg) {
    case PriorAggregation::average_parameters: return "average-parameters";
    case PriorAggregation::average_kl: return "average-kl";
  }
  return "?";
}

PriorAggregation prior_aggregation_from_string(const std::string& name) {
  if (name == "average-parameters") return PriorAggregation::average_parameters;
  if (name == "average-kl") return PriorAggregation::average_kl;
  throw std::invalid_argument("unknown prior aggregation '" + name +
                              "' (expected average-parameters or average-kl)");
}

const char* to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::sampled: return "sampled";
    case EvalMode::mean: return "mean";
    case EvalMode::baseline: return "baseline";
  }
  return "?";
}

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "sampled") return EvalMode::sampled;
  if (name == "mean") return EvalMode::mean;
  if (name == "baseline") return EvalMode::baseline;
  throw std::invalid_argument("unknown eval mode '" + name +
                              "' (expected sampled, mean, or baseline)");
}

namespace {

/// Per-element KL integrand: (lv_p - lv_q) + exp(lv_q - lv_p)
/// + (mu_q - mu_p)^2 exp(-lv_p); the "-1" and the 1/2 are applied after the
/// reduction.
Var kl_integrand(GaussianVars q, GaussianVars p) {
  require_same_shape(q.mean.value(), p.mean.value(), "gaussian_kl");
  require_same_shape(q.log_var.value(), p.log_var.value(), "gaussian_kl");
  require_same_shape(q.mean.value(), q.log_var.value(), "gaussian_kl");
  Var diff_lv = p.log_var - q.log_var;
  Var ratio = exp(q.log_var - p.log_var);
  Var mean_term = square(q.mean - p.mean) * exp(negate(p.log_var));
  return diff_lv + ratio + mean_term;
}

}  // namespace

Var gaussian_kl(GaussianVars q, GaussianVars p) {
  Var inner = kl_integrand(q, p);
  double count = static_cast<double>(inner.value().size());
  return scale(add_scalar(sum_all(inner), -count), 0.5);
}

Var gaussian_kl_rows(GaussianVars q, GaussianVars p) {
  Var inner = kl_integrand(q, p);
  double width = static_cast<double>(inner.value().cols());
  return scale(add_scalar(sum_cols(inner), -width), 0.5);
}

double gaussian_kl_value(double mean_q, double var_q, double mean_p, double var_p) {
  if (!(var_q > 0.0) || !(var_p > 0.0)) {
    throw std::invalid_argument("gaussian_kl: variances must be positive");
  }
  double d = mean_q - mean_p;
  return 0.5 * (std::log(var_p / var_q) + (var_q + d * d) / var_p - 1.0);
}

Var gaussian_log_likelihood(Var predictions, const Tensor& targets, double noise_std) {
  if (!(noise_std > 0.0)) {
    throw std::invalid_argument("gaussian_log_likelihood: noise_std must be positive");
  }
  require_same_shape(predictions.value(), targets, "gaussian_log_likelihood");
  Graph& g = *predictions.graph;
  double var = noise_std * noise_std;
  double count = static_cast<double>(targets.size());
  double norm = -0.5 * count * std::log(2.0 * M_PI * var);
  Var sq = sum_all(square(predictions - g.constant(targets)));
  return add_scalar(scale(sq, -0.5 / var), norm);
}

Var categorical_log_likelihood(Var logits, const Tensor& one_hot_targets) {
  require_same_shape(logits.value(), one_hot_targets, "categorical_log_likelihood");
  Graph& g = *logits.graph;
  Var log_probs = log(softmax_rows(logits));
  return sum_all(log_probs * g.constant(one_hot_targets));
}

EpisodeNoise draw_episode_noise(int64_t basis_count, int64_t feature_width,
                                uint64_t seed, bool zero_epsilon) {
  if (basis_count < 1 || feature_width < 1) {
    throw std::invalid_argument("draw_episode_noise: dimensions must be positive");
  }
  EpisodeNoise noise;
  if (zero_epsilon) {
    noise.epsilon = Tensor::zeros(basis_count, feature_width);
  } else {
    Rng eps_rng(mix_seed(seed, 0xE5));
    noise.epsilon = eps_rng.normal_matrix(basis_count, feature_width);
  }
  Rng phase_rng(mix_seed(seed, 0xFA));
  noise.phases = draw_phases(basis_count, phase_rng);
  return noise;
}

EpisodeParts prepare_episode(Binder& bind, const Model& model, const Task& task) {
  EpisodeParts parts;
  parts.support_features = embed(bind, model.embedding, bind.constant(task.support_x));
  parts.query_features = embed(bind, model.embedding, bind.constant(task.query_x));
  parts.pooled_support =
      instance_pool(parts.support_features, task.support_labels, task.ways, task.shots);
  parts.aggregated = mean_rows(parts.pooled_support);
  return parts;
}

EpisodeOutput finish_episode(Binder& bind, const Model& model, const Task& task,
                             const ElboConfig& cfg, const EpisodeNoise& noise,
                             const EpisodeParts& parts, GaussianVars posterior,
                             LstmStateVars state_after) {
  GaussianVars priors =
      prior_from_queries(bind, model.prior, parts.query_features, parts.pooled_support);

  Var kl;
  if (cfg.prior_aggregation == PriorAggregation::average_parameters) {
    GaussianVars averaged{mean_rows(priors.mean), mean_rows(priors.log_var)};
    kl = gaussian_kl(posterior, averaged);
  } else {
    int64_t n_q = task.query_count();
    GaussianVars repeated{broadcast_rows(posterior.mean, n_q),
                          broadcast_rows(posterior.log_var, n_q)};
    kl = mean_all(gaussian_kl_rows(repeated, priors));
  }

  Var omega = reparameterize(posterior, bind.constant(noise.epsilon));
  Var phases = bind.constant(noise.phases);
  Var z_support = rff_feature_map(parts.support_features, omega, phases);
  Var z_query = rff_feature_map(parts.query_features, omega, phases);
  Var alpha = solve_krr(kernel_matrix(z_support), bind.constant(task.support_y), cfg.ridge);
  Var predictions = krr_predict(z_query, z_support, alpha);

  bool classification = task.ways > 1;
  Var log_lik = classification
      ? categorical_log_likelihood(predictions, task.query_y)
      : gaussian_log_likelihood(predictions, task.query_y, cfg.likelihood_noise);

  EpisodeOutput out;
  out.log_lik = log_lik;
  out.kl = kl;
  out.elbo = log_lik - scale(kl, cfg.kl_weight);
  out.predictions = predictions;
  out.state = state_after;
  return out;
}

EpisodeOutput episode_elbo(Binder& bind, const Model& model, const Task& task,
                           const ElboConfig& cfg, const EpisodeNoise& noise,
                           LstmStateVars carried) {
  if (model.inference.mode == RecurrentMode::bi_lstm) {
    throw std::logic_error("bidirectional mode must go through batch_elbo");
  }
  EpisodeParts parts = prepare_episode(bind, model, task);
  InferenceResult inf = infer_posterior(bind, model.inference, parts.aggregated, carried);
  return finish_episode(bind, model, task, cfg, noise, parts, inf.posterior, inf.state);
}

BatchOutput batch_elbo(Binder& bind, const Model& model, const std::vector<Task>& tasks,
                       const ElboConfig& cfg, const std::vector<EpisodeNoise>& noise) {
  if (tasks.empty()) throw std::invalid_argument("batch_elbo: empty batch");
  if (tasks.size() != noise.size()) {
    throw std::invalid_argument("batch_elbo: tasks/noise count mismatch");
  }

  BatchOutput out;
  out.episodes.reserve(tasks.size());
  if (model.inference.mode == RecurrentMode::bi_lstm) {
    std::vector<EpisodeParts> parts;
    std::vector<Var> aggregated;
    parts.reserve(tasks.size());
    for (const Task& t : tasks) {
      parts.push_back(prepare_episode(bind, model, t));
      aggregated.push_back(parts.back().aggregated);
    }
    std::vector<GaussianVars> posteriors =
        infer_posterior_sequence(bind, model.inference, aggregated);
    for (size_t i = 0; i < tasks.size(); ++i) {
      out.episodes.push_back(finish_episode(bind, model, tasks[i], cfg, noise[i],
                                            parts[i], posteriors[i], LstmStateVars{}));
    }
  } else {
    LstmStateVars carried;
    for (size_t i = 0; i < tasks.size(); ++i) {
      EpisodeOutput ep = episode_elbo(bind, model, tasks[i], cfg, noise[i], carried);
      carried = ep.state;
      out.episodes.push_back(ep);
    }
  }

  Var total = out.episodes[0].elbo;
  for (size_t i = 1; i < out.episodes.size(); ++i) total = total + out.episodes[i].elbo;
  out.loss = negate(total);
  return out;
}

ElboTerms extract_terms(const EpisodeOutput& out, double beta) {
  ElboTerms terms;
  terms.log_lik = out.log_lik.value()[0];
  terms.kl = out.kl.value()[0];
  terms.elbo = out.elbo.value()[0];
  terms.beta = beta;
  return terms;
}

double episode_metric(const Task& task, const Tensor& predictions, bool classification) {
  require_same_shape(predictions, task.query_y, "episode_metric");
  int64_t n = predictions.rows();
  if (n == 0) throw std::invalid_argument("episode_metric: no queries");
  if (!classification) {
    double sq = 0.0;
    for (int64_t i = 0; i < predictions.size(); ++i) {
      double d = predictions[i] - task.query_y[i];
      sq += d * d;
    }
    return sq / static_cast<double>(predictions.size());
  }
  int64_t hits = 0;
  for (int64_t r = 0; r < n; ++r) {
    int64_t best_pred = 0, best_true = 0;
    for (int64_t c = 1; c < predictions.cols(); ++c) {
      if (predictions.at(r, c) > predictions.at(r, best_pred)) best_pred = c;
      if (task.query_y.at(r, c) > task.query_y.at(r, best_true)) best_true = c;
    }
    if (best_pred == best_true) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Tensor predict_points(const Model& model, const Task& task, const ElboConfig& cfg,
                      const EpisodeNoise& noise, const Tensor& points) {
  if (points.cols() != task.support_x.cols()) {
    throw std::invalid_argument("predict_points: input width mismatch");
  }
  Graph g;
  Binder bind(g);
  EpisodeParts parts = prepare_episode(bind, model, task);

  GaussianVars posterior;
  if (model.inference.mode == RecurrentMode::bi_lstm) {
    posterior = infer_posterior_sequence(bind, model.inference, {parts.aggregated})[0];
  } else {
    posterior = infer_posterior(bind, model.inference, parts.aggregated, LstmStateVars{})
                    .posterior;
  }

  Var omega = reparameterize(posterior, bind.constant(noise.epsilon));
  Var phases = bind.constant(noise.phases);
  Var z_support = rff_feature_map(parts.support_features, omega, phases);
  Var alpha = solve_krr(kernel_matrix(z_support), bind.constant(task.support_y), cfg.ridge);
  Var point_features = embed(bind, model.embedding, bind.constant(points));
  Var z_points = rff_feature_map(point_features, omega, phases);
  return krr_predict(z_points, z_support, alpha).value();
}

Tensor baseline_predict_points(const Task& task, const ElboConfig& cfg, uint64_t seed,
                               const Tensor& points) {
  if (points.cols() != task.support_x.cols()) {
    throw std::invalid_argument("baseline_predict_points: input width mismatch");
  }
  Rng omega_rng(mix_seed(seed, 0xBA));
  Rng phase_rng(mix_seed(seed, 0xFA));
  int64_t d_in = task.support_x.cols();
  Tensor omega = omega_rng.normal_matrix(cfg.basis_count, d_in);
  Tensor phases = draw_phases(cfg.basis_count, phase_rng);

  Graph g;
  Var z_support = rff_feature_map(g.constant(task.support_x), g.constant(omega),
                                  g.constant(phases));
  Var z_points = rff_feature_map(g.constant(points), g.constant(omega),
                                 g.constant(phases));
  Var alpha = solve_krr(kernel_matrix(z_support), g.constant(task.support_y), cfg.ridge);
  return krr_predict(z_points, z_support, alpha).value();
}

Tensor baseline_predictions(const Task& task, const ElboConfig& cfg, uint64_t seed) {
  return baseline_predict_points(task, cfg, seed, task.query_x);
}

}  // namespace vrff
