#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfts/core/series.hpp"

namespace cfts::cf {

struct LossWeights {
  // triplet, adversarial, classifier, L0 surrogate, L1
  std::array<double, 5> lambda{1.0, 1.0, 1.0, 1.0, 1.0};
};

enum class MarginMode { fixed, auto_central };

struct MarginConfig {
  MarginMode mode = MarginMode::auto_central;
  double gamma = 1.0;              // fixed mode
  std::vector<double> candidates;  // optional explicit candidate set
};

/// Which example set the triplet pulls the counterfactual toward.
enum class TripletOrientation {
  toward_desired,  // positives: desired-class examples; negatives: nearest same-class examples
  toward_factual,  // positives: nearest same-class examples; negatives: desired-class examples
};

enum class Variant { gan, countergan, sparse, trishgan };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct LofConfig {
  std::size_t k = 5;
  double theta = 1.0;
};

struct DiscoverySettings {
  Eigen::Index k_pips = 5;
  std::size_t per_class = 5;
  Eigen::Index max_length = 0;
};

struct ClassifierSettings {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 5e-3;
  Eigen::Index hidden_size = 16;
};

struct NunSettings {
  Eigen::Index window_len = 10;
  std::size_t max_segments = 5;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-5;
  Eigen::Index hidden_size = 32;
  LossWeights weights;
  MarginConfig margin;
  std::size_t triplet_n = 4;
  bool use_shapelet = true;
  bool use_triplet = true;
  bool use_classifier_loss = true;
  bool mask_residuals = true;
  Variant variant = Variant::trishgan;
  double eps_l0 = 0.01;
  double sparsity_tau = 1e-6;
  LofConfig lof;

  Label queried_label = 1;
  TripletOrientation triplet_orientation = TripletOrientation::toward_desired;
  DiscoverySettings discovery;
  ClassifierSettings classifier;
  NunSettings nun;
  std::vector<double> noise_scales{0.0, 0.2, 0.4, 0.6};

  Label desired_label() const { return other_label(queried_label); }
};

/// Parses and validates; unknown keys and out-of-range values are errors.
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::filesystem::path& path);
void validate(const TrainConfig& cfg);

}  // namespace cfts::cf
