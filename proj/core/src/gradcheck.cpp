#include "vrff/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace vrff {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  Tensor x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite differences: step must be > 0");
  Tensor grad(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "relative_error");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), floor});
  return std::sqrt(diff) / denom;
}

}  // namespace vrff
