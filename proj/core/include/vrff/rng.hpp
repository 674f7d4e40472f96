#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "vrff/tensor.hpp"

namespace vrff {

/// Mixes a seed with a stream tag or index (splitmix64 finalizer), so that
/// derived streams are decorrelated and depend only on (seed, salt).
uint64_t mix_seed(uint64_t seed, uint64_t salt);

/// Seeded generator with explicit distribution mapping.
///
/// The engine is std::mt19937_64 (exact sequence fixed by the standard); the
/// uniform and normal mappings are implemented here so that draws are
/// identical across standard library implementations and the full state,
/// including the Box-Muller spare, serializes exactly.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two uniforms per pair and
  /// caches the second value.
  double normal();

  Tensor normal_matrix(int64_t rows, int64_t cols);
  Tensor uniform_matrix(int64_t rows, int64_t cols, double lo, double hi);

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

private:
  Rng() : engine_() {}

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vrff
