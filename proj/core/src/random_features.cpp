#include "vrff/random_features.hpp"

#include <cmath>
#include <stdexcept>

namespace vrff {

Tensor reparameterize_sample(const Tensor& mean, const Tensor& log_var,
                             const Tensor& epsilon) {
  require_same_shape(mean, log_var, "reparameterize");
  if (mean.rows() != 1 || epsilon.cols() != mean.cols()) {
    throw std::invalid_argument("reparameterize: mean must be 1xd, epsilon *xd");
  }
  int64_t d = mean.cols();
  Tensor out(std::vector<int64_t>{epsilon.rows(), d});
  for (int64_t i = 0; i < d; ++i) {
    double scale = std::exp(0.5 * log_var[i]);
    if (!std::isfinite(scale)) {
      throw NonFiniteError("reparameterize: non-finite scale from log variance");
    }
    for (int64_t j = 0; j < epsilon.rows(); ++j) {
      out.at(j, i) = mean[i] + scale * epsilon.at(j, i);
    }
  }
  return out;
}

Var reparameterize(GaussianVars dist, Var epsilon) {
  int64_t n = epsilon.value().rows();
  Var sigma = exp(scale(dist.log_var, 0.5));
  return broadcast_rows(dist.mean, n) + broadcast_rows(sigma, n) * epsilon;
}

Tensor draw_standard_normal(int64_t rows, int64_t cols, Rng& rng) {
  return rng.normal_matrix(rows, cols);
}

Tensor draw_phases(int64_t count, Rng& rng) {
  return rng.uniform_matrix(1, count, 0.0, 2.0 * M_PI);
}

Var rff_feature_map(Var features, Var omega, Var phases) {
  int64_t d = features.value().cols();
  int64_t basis = omega.value().rows();
  if (omega.value().cols() != d) {
    throw std::invalid_argument("rff_feature_map: feature/frequency width mismatch");
  }
  if (phases.value().rows() != 1 || phases.value().cols() != basis) {
    throw std::invalid_argument("rff_feature_map: phases must be 1 x basis count");
  }
  int64_t n = features.value().rows();
  Var arg = matmul(features, transposed(omega)) + broadcast_rows(phases, n);
  return scale(cos(arg), std::sqrt(2.0 / static_cast<double>(basis)));
}

Tensor rff_feature_map_value(const Tensor& features, const Tensor& omega,
                             const Tensor& phases) {
  Graph g;
  Var z = rff_feature_map(g.constant(features), g.constant(omega), g.constant(phases));
  return z.value();
}

Var kernel_matrix(Var z) { return matmul(z, transposed(z)); }

Var solve_krr(Var kernel, Var targets, double ridge) {
  const Tensor& k = kernel.value();
  if (k.rows() != k.cols()) throw std::invalid_argument("solve_krr: kernel must be square");
  if (targets.value().rows() != k.rows()) {
    throw std::invalid_argument("solve_krr: kernel/target row mismatch");
  }
  if (!(ridge > 0.0)) throw std::invalid_argument("solve_krr: ridge must be positive");
  Var damped = kernel + kernel.graph->constant(Tensor::diagonal(k.rows(), ridge));
  return cholesky_solve(damped, targets);
}

Var krr_predict(Var query_features, Var support_features, Var alpha) {
  if (query_features.value().cols() != support_features.value().cols()) {
    throw std::invalid_argument("krr_predict: feature width mismatch");
  }
  if (alpha.value().rows() != support_features.value().rows()) {
    throw std::invalid_argument("krr_predict: weights/support row mismatch");
  }
  return matmul(matmul(query_features, transposed(support_features)), alpha);
}

}  // namespace vrff
