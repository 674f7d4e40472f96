#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "vrff/tensor.hpp"

namespace vrff {

/// One few-shot episode. Support rows are grouped by class in ascending
/// class order; support_labels[i] is the class of support row i. Regression
/// episodes use ways == 1 and all-zero labels.
struct Task {
  Tensor support_x;  // n_s x d_in
  Tensor support_y;  // n_s x d_out
  Tensor query_x;    // n_q x d_in
  Tensor query_y;    // n_q x d_out
  std::vector<int> support_labels;
  int ways = 1;
  int shots = 1;

  int64_t support_count() const { return support_x.rows(); }
  int64_t query_count() const { return query_x.rows(); }
};

/// Random sine curves y = A sin(x + p) + noise with A, p, x drawn uniformly.
struct SineTaskSpec {
  double amplitude_lo = 0.1;
  double amplitude_hi = 5.0;
  double phase_lo = 0.0;
  double phase_hi = 3.14159265358979323846;
  double input_lo = -5.0;
  double input_hi = 5.0;
  double noise_std = 0.0;

  void validate() const;
};

/// Latent amplitude/phase of one sine episode; deterministic in the seed.
struct SineCurve {
  double amplitude = 1.0;
  double phase = 0.0;
};
SineCurve sine_curve_of(const SineTaskSpec& spec, uint64_t seed);

/// Gaussian clusters with one-hot targets: a desk-scale classification stand-in.
struct ClusterTaskSpec {
  int dim = 4;
  int ways = 2;
  int shots = 1;
  double center_scale = 3.0;
  double spread = 0.3;

  void validate() const;
};

Task sample_sine_task(const SineTaskSpec& spec, int shots, int query_count, uint64_t seed);
Task sample_cluster_task(const ClusterTaskSpec& spec, int query_per_class, uint64_t seed);

/// Fully-specified episode generators (task family plus episode sizes).
struct SineEpisodes {
  SineTaskSpec spec;
  int shots = 5;
  int query_count = 15;
};
struct ClusterEpisodes {
  ClusterTaskSpec spec;
  int query_per_class = 15;
};
using EpisodeSource = std::variant<SineEpisodes, ClusterEpisodes>;

Task sample_episode(const EpisodeSource& source, uint64_t seed);
int input_dim(const EpisodeSource& source);
int output_dim(const EpisodeSource& source);
bool is_classification(const EpisodeSource& source);
int episode_ways(const EpisodeSource& source);
int episode_shots(const EpisodeSource& source);

/// Deterministic ordered task sequence: task i depends only on (seed, i), so
/// streams can be replayed or resumed from an index.
class EpisodeStream {
public:
  EpisodeStream(EpisodeSource source, uint64_t seed)
      : source_(std::move(source)), seed_(seed) {}

  Task next() { return at(index_++); }
  Task at(uint64_t index) const;
  uint64_t position() const { return index_; }
  void seek(uint64_t index) { index_ = index; }
  const EpisodeSource& source() const { return source_; }

private:
  EpisodeSource source_;
  uint64_t seed_ = 0;
  uint64_t index_ = 0;
};

std::vector<Task> episode_batch(EpisodeStream& stream, int count);

}  // namespace vrff
