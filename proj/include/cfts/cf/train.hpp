#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cfts/cf/config.hpp"
#include "cfts/cf/losses.hpp"
#include "cfts/core/series.hpp"
#include "cfts/nn/adam.hpp"
#include "cfts/nn/networks.hpp"
#include "cfts/shapelet/shapelet.hpp"

namespace cfts::cf {

struct ClassifierBundle {
  nn::SequenceClassifier model;
  nn::Adam optimizer;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
};

/// Supervised BCE training of the black-box classifier on the labels.
ClassifierBundle train_classifier(const MtsDataset& train, const ClassifierSettings& settings, std::uint64_t seed);

std::vector<Label> predict_all(const nn::SequenceClassifier& c, const MtsDataset& ds);

void save_classifier(const ClassifierBundle& b, const std::filesystem::path& path);
ClassifierBundle load_classifier(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double tcv = 0.0;       // percent of training queries flipped during the epoch
  double loss_g = 0.0;
  double loss_d = 0.0;
  std::array<double, 5> parts{};  // triplet, adversarial, classifier, l0, l1
};

struct ModelBundle {
  TrainConfig config;  // effective config, variant switches applied
  nn::Generator generator;
  nn::SequenceClassifier discriminator;
  nn::Adam g_opt;
  nn::Adam d_opt;
  std::uint64_t seed = 0;
  double gamma = 0.0;  // margin in use
  std::vector<double> margin_candidates;
  std::vector<EpochLog> history;
};

void save_bundle(const ModelBundle& b, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

/// Per-query state that does not change during training.
struct PreparedQuery {
  Series generator_input;  // masked query, or the query itself
  Series indicator;        // residual mask; all ones when unmasked
  std::vector<shapelet::Region> regions;
};

PreparedQuery prepare_query(const MtsInstance& query, const shapelet::ShapeletPool* pool, Label pool_label,
                            const TrainConfig& cfg);

ModelBundle train(const MtsDataset& train, const shapelet::ShapeletPool* pool,
                  const nn::SequenceClassifier& classifier, const TrainConfig& cfg);

/// Margin from the central-margin rule over the initial anchors, or the fixed
/// value.
MarginSet initial_margin(const MtsDataset& train, const nn::SequenceClassifier& classifier, const TrainConfig& cfg);

struct CfResult {
  std::string id;
  Series query;
  Series residual;  // x_cf - query
  Series x_cf;
  double p_orig = 0.5;
  double p_cf = 0.5;
  bool flipped = false;
  std::vector<shapelet::Region> regions;
};

/// Counterfactuals for every query in one batched pass. With noise_scale > 0,
/// Gaussian noise is added to the generator input only.
std::vector<CfResult> generate_cfs(std::span<const MtsInstance> queries, const ModelBundle& bundle,
                                   const shapelet::ShapeletPool* pool, const nn::SequenceClassifier& classifier,
                                   double noise_scale = 0.0, std::uint64_t noise_seed = 0);

CfResult generate_cf(const MtsInstance& query, const ModelBundle& bundle, const shapelet::ShapeletPool* pool,
                     const nn::SequenceClassifier& classifier);

/// Test instances the generator is meant to explain: predicted as the
/// queried label.
std::vector<MtsInstance> select_queries(const MtsDataset& test, const nn::SequenceClassifier& classifier,
                                        Label queried_label);

}  // namespace cfts::cf
