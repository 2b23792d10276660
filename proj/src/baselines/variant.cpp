#include "cfts/baselines/variant.hpp"

namespace cfts::baselines {

VariantConfig derive_variant(const cf::TrainConfig& cfg) {
  VariantConfig v;
  v.variant = cfg.variant;
  switch (cfg.variant) {
    case cf::Variant::trishgan:
      v.head = nn::HeadKind::dual_relu;
      v.use_shapelet = cfg.use_shapelet;
      v.use_triplet = cfg.use_triplet;
      v.mask_residuals = cfg.use_shapelet && cfg.mask_residuals;
      break;
    case cf::Variant::sparse:
      v.head = nn::HeadKind::dual_relu;
      v.use_shapelet = v.use_triplet = v.mask_residuals = false;
      break;
    case cf::Variant::countergan:
      v.head = nn::HeadKind::linear_diff;
      v.use_shapelet = v.use_triplet = v.mask_residuals = false;
      break;
    case cf::Variant::gan:
      v.head = nn::HeadKind::tanh_full;
      v.residual = false;
      v.use_shapelet = v.use_triplet = v.mask_residuals = false;
      break;
  }
  return v;
}

cf::TrainConfig effective_config(const cf::TrainConfig& cfg) {
  const auto v = derive_variant(cfg);
  cf::TrainConfig out = cfg;
  out.use_shapelet = v.use_shapelet;
  out.use_triplet = v.use_triplet;
  out.mask_residuals = v.mask_residuals;
  return out;
}

}  // namespace cfts::baselines
