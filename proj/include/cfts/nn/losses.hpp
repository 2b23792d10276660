#pragma once

#include <algorithm>
#include <cmath>

namespace cfts::nn {

inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Binary cross-entropy on a clamped probability.
inline double bce(double prob, int target) {
  const double p = clamp_prob(prob);
  return target == 1 ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace cfts::nn
