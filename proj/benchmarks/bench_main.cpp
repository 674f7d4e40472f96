#include <benchmark/benchmark.h>

#include "vrff/adam.hpp"
#include "vrff/elbo.hpp"
#include "vrff/networks.hpp"
#include "vrff/random_features.hpp"
#include "vrff/rng.hpp"
#include "vrff/tasks.hpp"
#include "vrff/trainer.hpp"

namespace {

using namespace vrff;

// Sizes mirror the default training configuration: 40-wide features,
// 256 bases, 5-shot sine episodes with 15 queries.

void BM_RffFeatureMap(benchmark::State& state) {
  const int64_t n = state.range(0);
  const int64_t basis_count = 256;
  const int64_t width = 40;
  Rng rng(1);
  Tensor features = draw_standard_normal(n, width, rng);
  Tensor omega = draw_standard_normal(basis_count, width, rng);
  Tensor phases = draw_phases(basis_count, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rff_feature_map_value(features, omega, phases));
  }
}
BENCHMARK(BM_RffFeatureMap)->Arg(5)->Arg(20)->Arg(100);

void BM_KrrSolve(benchmark::State& state) {
  const int64_t n_s = state.range(0);
  Rng rng(2);
  Tensor z = draw_standard_normal(n_s, 256, rng);
  Tensor y = draw_standard_normal(n_s, 1, rng);
  for (auto _ : state) {
    Graph g;
    Binder bind(g);
    Var alpha = solve_krr(kernel_matrix(bind.constant(z)), bind.constant(y), 1e-3);
    benchmark::DoNotOptimize(alpha.value());
  }
}
BENCHMARK(BM_KrrSolve)->Arg(5)->Arg(20)->Arg(50);

void BM_LstmStep(benchmark::State& state) {
  Rng rng(3);
  LstmCell cell = make_lstm_cell(40, 40, rng);
  Tensor input = draw_standard_normal(1, 40, rng);
  for (auto _ : state) {
    Graph g;
    Binder bind(g);
    LstmStateVars out = lstm_step(bind, cell, bind.constant(input),
                                  zero_lstm_state(g, 40));
    benchmark::DoNotOptimize(out.hidden.value());
  }
}
BENCHMARK(BM_LstmStep);

struct EpisodeFixture {
  Model model;
  Task task;
  ElboConfig cfg;
  EpisodeNoise noise;

  EpisodeFixture() {
    SineEpisodes sine;
    task = sample_episode(EpisodeSource{sine}, 7);
    Rng rng(4);
    model = make_model(1, 40, 40, RecurrentMode::vanilla_lstm, rng);
    cfg.basis_count = 256;
    noise = draw_episode_noise(cfg.basis_count, 40, 9, false);
  }
};

void BM_EpisodeElboForward(benchmark::State& state) {
  EpisodeFixture fx;
  for (auto _ : state) {
    Graph g;
    Binder bind(g);
    EpisodeOutput out =
        episode_elbo(bind, fx.model, fx.task, fx.cfg, fx.noise, LstmStateVars{});
    benchmark::DoNotOptimize(out.elbo.value());
  }
}
BENCHMARK(BM_EpisodeElboForward);

void BM_EpisodeElboBackward(benchmark::State& state) {
  EpisodeFixture fx;
  for (auto _ : state) {
    Graph g;
    Binder bind(g);
    EpisodeOutput out =
        episode_elbo(bind, fx.model, fx.task, fx.cfg, fx.noise, LstmStateVars{});
    g.backward(out.elbo);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_EpisodeElboBackward);

void BM_AdamStep(benchmark::State& state) {
  Rng rng(5);
  Model model = make_model(1, 40, 40, RecurrentMode::vanilla_lstm, rng);
  ParamRegistry registry = registry_of(model);
  AdamState adam(registry.tensors(), AdamConfig{});
  std::vector<Tensor> grads;
  for (Tensor* p : registry.tensors()) {
    grads.push_back(draw_standard_normal(p->rows(), p->cols(), rng));
  }
  for (auto _ : state) {
    adam.step(registry.tensors(), grads);
  }
}
BENCHMARK(BM_AdamStep);

void BM_TrainerStep(benchmark::State& state) {
  SineEpisodes sine;
  TrainConfig cfg;
  cfg.episodes_per_iteration = static_cast<int>(state.range(0));
  cfg.basis_count = 256;
  Trainer trainer(sine, cfg, Seeds{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.step());
  }
}
BENCHMARK(BM_TrainerStep)->Arg(1)->Arg(6);

}  // namespace

BENCHMARK_MAIN();
