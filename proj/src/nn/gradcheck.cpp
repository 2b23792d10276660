#include "cfts/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cfts::nn {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

Matrix numeric_gradient(Matrix& x, const std::function<double()>& loss, double h) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    auto at = [&](double offset) {
      x.data()[i] = orig + offset;
      return loss();
    };
    // Five-point stencil, O(h^4).
    const double d1 = at(h) - at(-h);
    const double d2 = at(2 * h) - at(-2 * h);
    x.data()[i] = orig;
    g.data()[i] = (8.0 * d1 - d2) / (12.0 * h);
  }
  return g;
}

GradCheckResult grad_check(std::span<ParamTensor* const> params, const std::function<double()>& loss,
                           const std::function<void()>& analytic, double h) {
  analytic();
  GradCheckResult r;
  for (auto* p : params) {
    const Matrix num = numeric_gradient(p->value, loss, h);
    for (Index i = 0; i < num.size(); ++i) {
      r.max_rel_error = std::max(r.max_rel_error, relative_error(p->grad.data()[i], num.data()[i]));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace cfts::nn
