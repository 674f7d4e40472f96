#pragma once

#include <cstdint>

#include "vrff/graph.hpp"
#include "vrff/networks.hpp"
#include "vrff/rng.hpp"
#include "vrff/tensor.hpp"

namespace vrff {

/// Diagonal Gaussian over a single frequency vector of width d; every
/// sampled basis row draws from this one distribution.
struct FrequencyPosterior {
  Tensor mean;     // 1 x d
  Tensor log_var;  // 1 x d
};

/// Row j of the result is mean + exp(log_var / 2) * epsilon_j; epsilon is
/// basis_count x d standard normal. The value-level form rejects non-finite
/// scales; the graph form differentiates through mean and log_var while
/// epsilon stays constant.
Tensor reparameterize_sample(const Tensor& mean, const Tensor& log_var,
                             const Tensor& epsilon);
Var reparameterize(GaussianVars dist, Var epsilon);

Tensor draw_standard_normal(int64_t rows, int64_t cols, Rng& rng);
/// 1 x count phases, uniform in [0, 2*pi).
Tensor draw_phases(int64_t count, Rng& rng);

/// Random Fourier feature map: sqrt(2/D) * cos(F Omega^T + phases), rows are
/// inputs, columns the D basis functions.
Var rff_feature_map(Var features, Var omega, Var phases);
Tensor rff_feature_map_value(const Tensor& features, const Tensor& omega,
                             const Tensor& phases);

/// Gram matrix z z^T of a feature matrix.
Var kernel_matrix(Var z);

/// alpha solving (K + ridge I) alpha = y via Cholesky; differentiable in K
/// and y. Requires ridge > 0.
Var solve_krr(Var kernel, Var targets, double ridge);

/// Predictions z_q z_s^T alpha for query features against the fitted weights.
Var krr_predict(Var query_features, Var support_features, Var alpha);

}  // namespace vrff
