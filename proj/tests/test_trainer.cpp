#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "vrff/rng.hpp"
#include "vrff/trainer.hpp"

using namespace vrff;

namespace {

TrainConfig tiny_config(RecurrentMode mode = RecurrentMode::vanilla_lstm) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.iterations = 10;
  cfg.episodes_per_iteration = 2;
  cfg.basis_count = 8;
  cfg.feature_width = 6;
  cfg.hidden_width = 5;
  cfg.mode = mode;
  return cfg;
}

EpisodeSource sine_source() {
  SineEpisodes eps;
  eps.shots = 3;
  eps.query_count = 4;
  return eps;
}

std::vector<Tensor> snapshot(Trainer& t) {
  std::vector<Tensor> out;
  for (Tensor* p : registry_of(t.model()).tensors()) out.push_back(*p);
  return out;
}

}  // namespace

TEST_CASE("train config validation names the offending field") {
  TrainConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());

  auto expect_reject = [](TrainConfig c, const char* needle) {
    try {
      c.validate();
      FAIL_CHECK("expected rejection for " << needle);
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  TrainConfig c = tiny_config();
  c.learning_rate = -1;
  expect_reject(c, "learning_rate");
  c = tiny_config();
  c.iterations = 0;
  expect_reject(c, "iterations");
  c = tiny_config();
  c.episodes_per_iteration = 0;
  expect_reject(c, "episodes_per_iteration");
  c = tiny_config();
  c.basis_count = 0;
  expect_reject(c, "basis_count");
  c = tiny_config();
  c.ridge = 0;
  expect_reject(c, "ridge");
  c = tiny_config();
  c.kl_weight = -0.5;
  expect_reject(c, "kl_weight");
  c = tiny_config();
  c.likelihood_noise = 0;
  expect_reject(c, "likelihood_noise");
  c = tiny_config();
  c.feature_width = 0;
  expect_reject(c, "feature_width");
  c = tiny_config();
  c.hidden_width = 0;
  expect_reject(c, "hidden_width");
}

TEST_CASE("zero learning rate leaves parameters untouched but advances counters") {
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = 0.0;
  Trainer trainer(sine_source(), cfg, Seeds{});
  std::vector<Tensor> before = snapshot(trainer);
  ElboTerms terms = trainer.step();
  CHECK(std::isfinite(terms.elbo));
  std::vector<Tensor> after = snapshot(trainer);
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].raw() == after[i].raw());
  CHECK(trainer.iteration() == 1);
  CHECK(trainer.episode_counter() == 2);
  CHECK(trainer.optimizer().step_count() == 1);
}

TEST_CASE("one step per iteration, batch size episodes per step") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  trainer.step();
  trainer.step();
  trainer.step();
  CHECK(trainer.iteration() == 3);
  CHECK(trainer.episode_counter() == 6);
  CHECK(trainer.optimizer().step_count() == 3);
}

TEST_CASE("identical seeds reproduce the whole trajectory bit-for-bit") {
  Seeds seeds{11, 22, 33};
  Trainer a(sine_source(), tiny_config(), seeds);
  Trainer b(sine_source(), tiny_config(), seeds);
  for (int i = 0; i < 3; ++i) {
    ElboTerms ta = a.step();
    ElboTerms tb = b.step();
    CHECK(ta.elbo == tb.elbo);
    CHECK(ta.log_lik == tb.log_lik);
    CHECK(ta.kl == tb.kl);
  }
  std::vector<Tensor> pa = snapshot(a), pb = snapshot(b);
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].raw() == pb[i].raw());

  EvalResult ea = a.evaluate(5, EvalMode::mean);
  EvalResult eb = b.evaluate(5, EvalMode::mean);
  CHECK(ea.metric_mean == eb.metric_mean);
  CHECK(ea.metric_std == eb.metric_std);
}

TEST_CASE("init seed changes parameters; task seed changes episodes") {
  Seeds s1{1, 2, 3};
  Seeds s2{1, 99, 3};
  Trainer a(sine_source(), tiny_config(), s1);
  Trainer b(sine_source(), tiny_config(), s2);
  CHECK(snapshot(a)[0].raw() != snapshot(b)[0].raw());

  Seeds s3{50, 2, 3};
  Trainer c(sine_source(), tiny_config(), s3);
  CHECK(c.eval_task(0).support_x.raw() != a.eval_task(0).support_x.raw());
  CHECK(a.eval_task(0).support_x.raw() == b.eval_task(0).support_x.raw());
}

TEST_CASE("manual moment restore replays the interrupted run bit-exactly") {
  Seeds seeds{5, 6, 7};
  Trainer full(sine_source(), tiny_config(), seeds);
  for (int i = 0; i < 4; ++i) full.step();

  Trainer half(sine_source(), tiny_config(), seeds);
  half.step();
  half.step();

  Trainer resumed(sine_source(), tiny_config(), seeds);
  {
    auto src = registry_of(half.model()).tensors();
    auto dst = registry_of(resumed.model()).tensors();
    REQUIRE(src.size() == dst.size());
    for (size_t i = 0; i < src.size(); ++i) *dst[i] = *src[i];
    resumed.optimizer().restore(half.optimizer().first_moments(),
                                half.optimizer().second_moments(),
                                half.optimizer().step_count());
    resumed.restore_counters(half.iteration(), half.episode_counter());
  }
  CHECK(resumed.iteration() == 2);
  resumed.step();
  resumed.step();

  std::vector<Tensor> pf = snapshot(full), pr = snapshot(resumed);
  for (size_t i = 0; i < pf.size(); ++i) CHECK(pf[i].raw() == pr[i].raw());
  CHECK_THROWS_AS(resumed.restore_counters(-1, 0), std::invalid_argument);
}

TEST_CASE("evaluation is repeatable and independent of pending recurrent state") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  EvalResult r1 = trainer.evaluate(6, EvalMode::mean);
  EvalResult r2 = trainer.evaluate(6, EvalMode::mean);
  CHECK(r1.metric_mean == r2.metric_mean);
  CHECK(r1.metric_std == r2.metric_std);
  CHECK(r1.episodes == 6);
  CHECK(r1.metric_mean > 0.0);  // regression MSE
  CHECK(r1.metric_std >= 0.0);

  trainer.step();
  EvalResult r3 = trainer.evaluate(6, EvalMode::mean);
  CHECK(r3.metric_mean != r1.metric_mean);  // parameters moved

  CHECK_THROWS_AS(trainer.evaluate(0, EvalMode::mean), std::invalid_argument);
  CHECK_THROWS_AS(trainer.evaluate(-3, EvalMode::mean), std::invalid_argument);
}

TEST_CASE("sampled mode differs from mean mode on the same tasks") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  EvalResult mean = trainer.evaluate(4, EvalMode::mean);
  EvalResult sampled = trainer.evaluate(4, EvalMode::sampled);
  CHECK(mean.metric_mean != sampled.metric_mean);
  CHECK(mean.mode == EvalMode::mean);
  CHECK(sampled.mode == EvalMode::sampled);
}

TEST_CASE("baseline evaluation ignores the model parameters") {
  Seeds seeds{3, 4, 5};
  Seeds other_init{3, 123, 5};
  Trainer a(sine_source(), tiny_config(), seeds);
  Trainer b(sine_source(), tiny_config(), other_init);
  EvalResult ra = a.evaluate(5, EvalMode::baseline);
  EvalResult rb = b.evaluate(5, EvalMode::baseline);
  CHECK(ra.metric_mean == rb.metric_mean);
  CHECK(ra.mode == EvalMode::baseline);
}

TEST_CASE("evaluation tasks never appear in the training stream") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  EpisodeStream train_stream(sine_source(), mix_seed(Seeds{}.tasks, 1));
  for (uint64_t i = 0; i < 5; ++i) {
    Task eval = trainer.eval_task(i);
    for (uint64_t j = 0; j < 20; ++j) {
      Task train = train_stream.at(j);
      CHECK(eval.support_x.raw() != train.support_x.raw());
    }
  }
}

TEST_CASE("eval noise derives from the eval sampling stream") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  EpisodeNoise n0 = trainer.eval_noise(0, EvalMode::sampled);
  EpisodeNoise n0_again = trainer.eval_noise(0, EvalMode::sampled);
  CHECK(n0.epsilon.raw() == n0_again.epsilon.raw());
  EpisodeNoise n1 = trainer.eval_noise(1, EvalMode::sampled);
  CHECK(n0.epsilon.raw() != n1.epsilon.raw());
  EpisodeNoise mean = trainer.eval_noise(0, EvalMode::mean);
  CHECK(mean.phases.raw() == n0.phases.raw());
  for (int64_t i = 0; i < mean.epsilon.size(); ++i) CHECK(mean.epsilon[i] == 0.0);
}

TEST_CASE("a non-finite objective aborts the step naming the iteration") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  // forces exp(log_var_q - log_var_p) in the KL to overflow
  trainer.model().prior.log_var_head.bias = Tensor::filled(1, 6, -1e6);
  try {
    trainer.step();
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    std::string msg = e.what();
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(msg.find("non-finite") != std::string::npos);
  }
}

TEST_CASE("meta_train records one entry per iteration") {
  Trainer trainer(sine_source(), tiny_config(), Seeds{});
  auto log = meta_train(trainer, 4);
  REQUIRE(log.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(log[i].iteration == static_cast<int64_t>(i + 1));
    CHECK(std::isfinite(log[i].elbo));
    CHECK(log[i].elbo == doctest::Approx(log[i].log_lik - log[i].kl).epsilon(1e-12));
    CHECK_FALSE(log[i].has_eval);
  }
  CHECK(trainer.iteration() == 4);
}

TEST_CASE("all three modes run a classification smoke train") {
  ClusterEpisodes eps;
  eps.spec.dim = 3;
  eps.query_per_class = 3;
  for (RecurrentMode mode :
       {RecurrentMode::vanilla_lstm, RecurrentMode::bi_lstm, RecurrentMode::no_lstm}) {
    TrainConfig cfg = tiny_config(mode);
    Trainer trainer(EpisodeSource{eps}, cfg, Seeds{});
    ElboTerms terms = trainer.step();
    CHECK(std::isfinite(terms.elbo));
    EvalResult res = trainer.evaluate(3, EvalMode::mean);
    CHECK(res.metric_mean >= 0.0);
    CHECK(res.metric_mean <= 1.0);  // classification accuracy
  }
}
