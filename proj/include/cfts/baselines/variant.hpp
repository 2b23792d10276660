#pragma once

#include "cfts/cf/config.hpp"
#include "cfts/nn/layers.hpp"

namespace cfts::baselines {

struct VariantConfig {
  cf::Variant variant = cf::Variant::trishgan;
  nn::HeadKind head = nn::HeadKind::dual_relu;
  bool residual = true;  // false: the generator emits the whole counterfactual
  bool use_shapelet = true;
  bool use_triplet = true;
  bool mask_residuals = true;
};

VariantConfig derive_variant(const cf::TrainConfig& cfg);

/// The config with the variant's switches written into it.
cf::TrainConfig effective_config(const cf::TrainConfig& cfg);

}  // namespace cfts::baselines
