#include "vrff/adam.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrff {

AdamState::AdamState(const std::vector<Tensor*>& params, AdamConfig cfg) : cfg_(cfg) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Tensor* p : params) {
    first_.emplace_back(p->shape());
    second_.emplace_back(p->shape());
  }
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    std::ostringstream os;
    os << "adam: expected " << first_.size() << " parameter groups, got "
       << params.size() << " params / " << grads.size() << " grads";
    throw std::invalid_argument(os.str());
  }
  ++step_count_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    require_same_shape(p, first_[k], "adam moment");
    require_same_shape(p, g, "adam gradient");
    Tensor& m = first_[k];
    Tensor& v = second_[k];
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

void AdamState::restore(std::vector<Tensor> first, std::vector<Tensor> second,
                        int64_t step_count) {
  if (first.size() != first_.size() || second.size() != second_.size())
    throw std::invalid_argument("adam restore: moment group count mismatch");
  for (size_t k = 0; k < first.size(); ++k) {
    require_same_shape(first[k], first_[k], "adam restore");
    require_same_shape(second[k], second_[k], "adam restore");
  }
  first_ = std::move(first);
  second_ = std::move(second);
  step_count_ = step_count;
}

}  // namespace vrff
