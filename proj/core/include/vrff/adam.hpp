#pragma once

#include <cstdint>
#include <vector>

#include "vrff/tensor.hpp"

namespace vrff {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over an ordered parameter list. Moment tensors mirror
/// the parameter shapes; the step counter increases by exactly one per step.
class AdamState {
public:
  AdamState(const std::vector<Tensor*>& params, AdamConfig cfg = {});

  /// Applies one update in place. `grads` must align with the parameter list
  /// passed at construction (same order, same shapes).
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  // checkpoint access
  const std::vector<Tensor>& first_moments() const { return first_; }
  const std::vector<Tensor>& second_moments() const { return second_; }
  void restore(std::vector<Tensor> first, std::vector<Tensor> second, int64_t step_count);

private:
  AdamConfig cfg_;
  std::vector<Tensor> first_, second_;
  int64_t step_count_ = 0;
};

}  // namespace vrff
