#include "vrff/tasks.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vrff/rng.hpp"

namespace vrff {

namespace {

[[noreturn]] void reject(const std::string& msg) { throw std::invalid_argument(msg); }

void require_positive(int v, const char* name) {
  if (v < 1) {
    std::ostringstream os;
    os << name << " must be >= 1, got " << v;
    reject(os.str());
  }
}

}  // namespace

void SineTaskSpec::validate() const {
  if (!(amplitude_lo > 0.0)) reject("sine spec: amplitude_lo must be > 0");
  if (!(amplitude_hi >= amplitude_lo)) reject("sine spec: amplitude range is degenerate");
  if (!(phase_hi >= phase_lo)) reject("sine spec: phase range is degenerate");
  if (!(input_hi > input_lo)) reject("sine spec: input range is degenerate");
  if (noise_std < 0.0) reject("sine spec: noise_std must be >= 0");
}

void ClusterTaskSpec::validate() const {
  if (dim < 1) reject("cluster spec: dim must be >= 1");
  if (ways < 2) reject("cluster spec: ways must be >= 2");
  require_positive(shots, "cluster spec: shots");
  if (!(spread > 0.0)) reject("cluster spec: spread must be > 0");
  if (!(center_scale > 0.0)) reject("cluster spec: center_scale must be > 0");
}

SineCurve sine_curve_of(const SineTaskSpec& spec, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5157));
  SineCurve c;
  c.amplitude = rng.uniform(spec.amplitude_lo, spec.amplitude_hi);
  c.phase = rng.uniform(spec.phase_lo, spec.phase_hi);
  return c;
}

Task sample_sine_task(const SineTaskSpec& spec, int shots, int query_count,
                      uint64_t seed) {
  spec.validate();
  require_positive(shots, "shots");
  require_positive(query_count, "query_count");

  const SineCurve curve = sine_curve_of(spec, seed);
  Rng rng(mix_seed(seed, 0x5158));

  Task task;
  task.ways = 1;
  task.shots = shots;
  task.support_labels.assign(static_cast<size_t>(shots), 0);

  auto draw = [&](int n, Tensor& xs, Tensor& ys) {
    xs = Tensor({n, 1});
    ys = Tensor({n, 1});
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform(spec.input_lo, spec.input_hi);
      double y = curve.amplitude * std::sin(x + curve.phase);
      if (spec.noise_std > 0.0) y += spec.noise_std * rng.normal();
      xs.at(i, 0) = x;
      ys.at(i, 0) = y;
    }
  };
  // support and query are disjoint draws
  draw(shots, task.support_x, task.support_y);
  draw(query_count, task.query_x, task.query_y);
  return task;
}

Task sample_cluster_task(const ClusterTaskSpec& spec, int query_per_class,
                         uint64_t seed) {
  spec.validate();
  require_positive(query_per_class, "query_per_class");

  Rng rng(mix_seed(seed, 0xC1u));
  const int c = spec.ways, k = spec.shots, d = spec.dim;

  Tensor centers({c, d});
  for (int64_t i = 0; i < centers.size(); ++i)
    centers[i] = spec.center_scale * rng.normal();

  Task task;
  task.ways = c;
  task.shots = k;
  task.support_x = Tensor({static_cast<int64_t>(c) * k, d});
  task.support_y = Tensor({static_cast<int64_t>(c) * k, c});
  task.query_x = Tensor({static_cast<int64_t>(c) * query_per_class, d});
  task.query_y = Tensor({static_cast<int64_t>(c) * query_per_class, c});
  task.support_labels.resize(static_cast<size_t>(c) * k);

  auto fill_point = [&](Tensor& xs, Tensor& ys, int64_t row, int cls) {
    for (int j = 0; j < d; ++j)
      xs.at(row, j) = centers.at(cls, j) + spec.spread * rng.normal();
    ys.at(row, cls) = 1.0;  // one-hot row
  };

  int64_t srow = 0;
  for (int cls = 0; cls < c; ++cls)
    for (int s = 0; s < k; ++s, ++srow) {
      task.support_labels[static_cast<size_t>(srow)] = cls;
      fill_point(task.support_x, task.support_y, srow, cls);
    }
  int64_t qrow = 0;
  for (int cls = 0; cls < c; ++cls)
    for (int q = 0; q < query_per_class; ++q, ++qrow)
      fill_point(task.query_x, task.query_y, qrow, cls);
  return task;
}

Task sample_episode(const EpisodeSource& source, uint64_t seed) {
  if (const auto* sine = std::get_if<SineEpisodes>(&source))
    return sample_sine_task(sine->spec, sine->shots, sine->query_count, seed);
  const auto& cluster = std::get<ClusterEpisodes>(source);
  return sample_cluster_task(cluster.spec, cluster.query_per_class, seed);
}

int input_dim(const EpisodeSource& source) {
  if (std::holds_alternative<SineEpisodes>(source)) return 1;
  return std::get<ClusterEpisodes>(source).spec.dim;
}

int output_dim(const EpisodeSource& source) {
  if (std::holds_alternative<SineEpisodes>(source)) return 1;
  return std::get<ClusterEpisodes>(source).spec.ways;
}

bool is_classification(const EpisodeSource& source) {
  return std::holds_alternative<ClusterEpisodes>(source);
}

int episode_ways(const EpisodeSource& source) {
  if (std::holds_alternative<SineEpisodes>(source)) return 1;
  return std::get<ClusterEpisodes>(source).spec.ways;
}

int episode_shots(const EpisodeSource& source) {
  if (const auto* sine = std::get_if<SineEpisodes>(&source)) return sine->shots;
  return std::get<ClusterEpisodes>(source).spec.shots;
}

Task EpisodeStream::at(uint64_t index) const {
  return sample_episode(source_, mix_seed(seed_, index));
}

std::vector<Task> episode_batch(EpisodeStream& stream, int count) {
  require_positive(count, "episode batch count");
  std::vector<Task> tasks;
  tasks.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) tasks.push_back(stream.next());
  return tasks;
}

}  // namespace vrff
