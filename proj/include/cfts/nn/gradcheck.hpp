#pragma once

#include <functional>
#include <span>

#include "cfts/nn/layers.hpp"

namespace cfts::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares the gradients left in `params` by `analytic` against central
/// finite differences of `loss`. `analytic` must zero and fill the grads;
/// `loss` must be a pure function of the current parameter values.
GradCheckResult grad_check(std::span<ParamTensor* const> params, const std::function<double()>& loss,
                           const std::function<void()>& analytic, double h = 1e-4);

double relative_error(double a, double b);

/// Numerical derivative of loss(x) with respect to every entry of x.
Matrix numeric_gradient(Matrix& x, const std::function<double()>& loss, double h = 1e-4);

}  // namespace cfts::nn
