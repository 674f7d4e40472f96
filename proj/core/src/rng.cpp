#include "vrff/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vrff {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  // splitmix64 finalizer over the combined word
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Tensor Rng::normal_matrix(int64_t rows, int64_t cols) {
  Tensor t({rows, cols});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = normal();
  return t;
}

Tensor Rng::uniform_matrix(int64_t rows, int64_t cols, double lo, double hi) {
  Tensor t({rows, cols});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
  return t;
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0);
  if (has_spare_) {
    os << ' ';
    os.precision(17);
    os << spare_;
  }
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng.engine_;
  int spare_flag = 0;
  is >> spare_flag;
  if (is.fail()) throw std::invalid_argument("Rng::deserialize: malformed state text");
  rng.has_spare_ = spare_flag != 0;
  if (rng.has_spare_) {
    is >> rng.spare_;
    if (is.fail()) throw std::invalid_argument("Rng::deserialize: malformed spare value");
  }
  return rng;
}

}  // namespace vrff
