#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cfts/nn/layers.hpp"

namespace cfts::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moments are stored in parameter order, so the same
/// parameter list must be passed on every step.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  /// Returns false and leaves everything untouched if any gradient is
  /// non-finite.
  bool step(std::span<ParamTensor* const> params);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  nlohmann::json to_json() const;
  void from_json(const nlohmann::json& j, std::span<ParamTensor* const> params);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace cfts::nn
