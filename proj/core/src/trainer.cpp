#include "vrff/trainer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrff {

namespace {

// Stream tags under the seed roots; training and evaluation never share a
// derived seed.
constexpr uint64_t kTrainStream = 1;
constexpr uint64_t kEvalStream = 2;

}  // namespace

void TrainConfig::validate() const {
  std::ostringstream bad;
  if (!(learning_rate >= 0.0)) bad << "learning_rate must be >= 0";
  else if (iterations < 1) bad << "iterations must be >= 1";
  else if (episodes_per_iteration < 1) bad << "episodes_per_iteration must be >= 1";
  else if (basis_count < 1) bad << "basis_count must be >= 1";
  else if (!(ridge > 0.0)) bad << "ridge must be > 0";
  else if (!(kl_weight >= 0.0)) bad << "kl_weight must be >= 0";
  else if (!(likelihood_noise > 0.0)) bad << "likelihood_noise must be > 0";
  else if (feature_width < 1) bad << "feature_width must be >= 1";
  else if (hidden_width < 1) bad << "hidden_width must be >= 1";
  if (!bad.str().empty()) throw std::invalid_argument("train config: " + bad.str());
}

ElboConfig TrainConfig::elbo() const {
  ElboConfig cfg;
  cfg.basis_count = basis_count;
  cfg.ridge = ridge;
  cfg.kl_weight = kl_weight;
  cfg.likelihood_noise = likelihood_noise;
  cfg.prior_aggregation = prior_aggregation;
  return cfg;
}

Trainer::Trainer(EpisodeSource source, TrainConfig cfg, Seeds seeds)
    : source_(std::move(source)), cfg_(cfg), seeds_(seeds),
      model_([&] {
        cfg.validate();
        Rng init_rng(mix_seed(seeds.init, 0));
        return make_model(input_dim(source_), cfg.feature_width, cfg.hidden_width,
                          cfg.mode, init_rng);
      }()),
      adam_([&] {
        AdamConfig acfg;
        acfg.learning_rate = cfg.learning_rate;
        return AdamState(registry_of(model_).tensors(), acfg);
      }()) {}

ElboTerms Trainer::step() {
  EpisodeStream stream(source_, mix_seed(seeds_.tasks, kTrainStream));
  stream.seek(episode_counter_);
  std::vector<Task> tasks = episode_batch(stream, cfg_.episodes_per_iteration);

  uint64_t noise_root = mix_seed(seeds_.sampling, kTrainStream);
  std::vector<EpisodeNoise> noise;
  noise.reserve(tasks.size());
  for (size_t b = 0; b < tasks.size(); ++b) {
    noise.push_back(draw_episode_noise(cfg_.basis_count, cfg_.feature_width,
                                       mix_seed(noise_root, episode_counter_ + b),
                                       /*zero_epsilon=*/false));
  }

  Graph g;
  Binder bind(g);
  BatchOutput batch = batch_elbo(bind, model_, tasks, cfg_.elbo(), noise);
  double loss = batch.loss.value()[0];
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "iteration " << (iteration_ + 1) << ": non-finite loss " << loss;
    throw NonFiniteError(msg.str());
  }
  g.backward(batch.loss);

  ParamRegistry registry = registry_of(model_);
  std::vector<Tensor*> params = registry.tensors();
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Tensor* p : params) {
    Var leaf = bind.lookup(*p);
    if (leaf.valid() && g.has_grad(leaf)) {
      grads.push_back(g.grad(leaf));
    } else {
      grads.push_back(Tensor(p->shape()));
    }
  }
  adam_.step(params, grads);

  double n = static_cast<double>(batch.episodes.size());
  ElboTerms mean;
  mean.beta = cfg_.kl_weight;
  for (const EpisodeOutput& ep : batch.episodes) {
    ElboTerms t = extract_terms(ep, cfg_.kl_weight);
    mean.elbo += t.elbo;
    mean.log_lik += t.log_lik;
    mean.kl += t.kl;
  }
  mean.elbo /= n;
  mean.log_lik /= n;
  mean.kl /= n;

  ++iteration_;
  episode_counter_ += tasks.size();
  return mean;
}

Task Trainer::eval_task(uint64_t index) const {
  EpisodeStream stream(source_, mix_seed(seeds_.tasks, kEvalStream));
  return stream.at(index);
}

uint64_t Trainer::eval_task_seed(uint64_t index) const {
  return mix_seed(mix_seed(seeds_.tasks, kEvalStream), index);
}

uint64_t Trainer::eval_sampling_seed(uint64_t index) const {
  return mix_seed(mix_seed(seeds_.sampling, kEvalStream), index);
}

EpisodeNoise Trainer::eval_noise(uint64_t index, EvalMode mode) const {
  return draw_episode_noise(cfg_.basis_count, cfg_.feature_width,
                            eval_sampling_seed(index),
                            /*zero_epsilon=*/mode == EvalMode::mean);
}

EvalResult Trainer::evaluate(int64_t episodes, EvalMode mode) const {
  if (episodes < 1) throw std::invalid_argument("evaluate: episode count must be >= 1");
  bool classify = is_classification(source_);
  std::vector<double> metrics;
  metrics.reserve(static_cast<size_t>(episodes));
  for (int64_t i = 0; i < episodes; ++i) {
    Task task = eval_task(static_cast<uint64_t>(i));
    Tensor predictions;
    if (mode == EvalMode::baseline) {
      predictions = baseline_predictions(task, cfg_.elbo(),
                                         eval_sampling_seed(static_cast<uint64_t>(i)));
    } else {
      EpisodeNoise noise = eval_noise(static_cast<uint64_t>(i), mode);
      predictions = predict_points(model_, task, cfg_.elbo(), noise, task.query_x);
    }
    metrics.push_back(episode_metric(task, predictions, classify));
  }

  EvalResult result;
  result.episodes = episodes;
  result.mode = mode;
  double sum = 0.0;
  for (double m : metrics) sum += m;
  result.metric_mean = sum / static_cast<double>(episodes);
  double sq = 0.0;
  for (double m : metrics) {
    double d = m - result.metric_mean;
    sq += d * d;
  }
  result.metric_std = std::sqrt(sq / static_cast<double>(episodes));
  return result;
}

void Trainer::restore_counters(int64_t iteration, uint64_t episode_counter) {
  if (iteration < 0) throw std::invalid_argument("restore: negative iteration");
  iteration_ = iteration;
  episode_counter_ = episode_counter;
}

std::vector<IterationRecord> meta_train(Trainer& trainer, int64_t iterations) {
  std::vector<IterationRecord> log;
  log.reserve(static_cast<size_t>(iterations));
  for (int64_t i = 0; i < iterations; ++i) {
    ElboTerms terms = trainer.step();
    IterationRecord rec;
    rec.iteration = trainer.iteration();
    rec.elbo = terms.elbo;
    rec.log_lik = terms.log_lik;
    rec.kl = terms.kl;
    log.push_back(rec);
  }
  return log;
}

}  // namespace vrff
