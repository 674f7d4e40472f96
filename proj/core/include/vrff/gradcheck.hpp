#pragma once

#include <functional>

#include "vrff/tensor.hpp"

namespace vrff {

/// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / (2h) per
/// coordinate. `f` must be deterministic; it is evaluated 2*size times.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  Tensor x, double step = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace vrff
