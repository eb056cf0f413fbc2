#pragma once

#include <functional>

#include "jarn/tensor.hpp"

namespace jarn {

// Central-difference estimate of the gradient of a scalar function at a
// point. Evaluates f twice per coordinate and never touches the reverse-mode
// machinery, so it can serve as an independent check of it.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double step);

// Infinity-norm relative disagreement, guarded against near-zero tensors:
// |a - b|_inf / max(|a|_inf, |b|_inf, floor).
double rel_error(const Tensor& a, const Tensor& b, double floor = 1e-8);

}  // namespace jarn
