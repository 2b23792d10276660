#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include "cfts/cf/config.hpp"
#include "cfts/core/series.hpp"
#include "cfts/nn/networks.hpp"

namespace cfts::cf {

/// Indices into the training set for one anchor.
struct Triplet {
  std::vector<std::size_t> factuals;         // nearest, same predicted class
  std::vector<std::size_t> counterfactuals;  // random, other predicted class
};

struct TripletBatch {
  std::size_t n = 0;
  std::vector<Triplet> triplets;  // one per query, in query order
};

/// The n training instances closest to `query` (flattened L2) whose
/// prediction equals `query_pred`. Ties go to the smaller index.
std::vector<std::size_t> nearest_like(const Series& query, Label query_pred, const MtsDataset& train,
                                      std::span<const Label> train_pred, std::size_t n);

/// n distinct uniform draws among training instances predicted differently
/// from `query_pred`, in draw order.
std::vector<std::size_t> random_unlike(Label query_pred, std::span<const Label> train_pred, std::size_t n,
                                       std::mt19937_64& rng);

TripletBatch sample_triplets(std::span<const Series> queries, std::span<const Label> query_pred,
                             const MtsDataset& train, std::span<const Label> train_pred, std::size_t n,
                             std::mt19937_64& rng);

/// Convenience form that runs the classifier itself.
TripletBatch sample_triplets(std::span<const Series> queries, const MtsDataset& train,
                             const nn::SequenceClassifier& classifier, std::size_t n, std::uint64_t seed);

/// Mean over the set of the summed absolute difference to `x`.
double mean_manhattan(const Series& x, std::span<const Series* const> set);

struct TripletLoss {
  double value = 0.0;
  double d_pos = 0.0;
  double d_neg = 0.0;
  Series grad;  // d value / d anchor
};

/// max(0, d(anchor, positives) - d(anchor, negatives) + gamma).
TripletLoss triplet_loss(const Series& anchor, std::span<const Series* const> positives,
                         std::span<const Series* const> negatives, double gamma);
TripletLoss triplet_loss(const Series& anchor, std::span<const Series> positives, std::span<const Series> negatives,
                         double gamma);

struct MarginSet {
  double gamma_central = 1.0;
  double delta = 0.0;
  std::vector<double> candidates{1.0};
  bool degenerate = true;
};

/// Margin set seeded by half the gap between the mean negative and mean
/// positive distances.
MarginSet central_margin(double mean_d_neg, double mean_d_pos);
MarginSet central_margin(std::span<const double> d_neg, std::span<const double> d_pos);

struct AdversarialLosses {
  double loss_d = 0.0;
  double loss_g = 0.0;
};

/// loss_d = -mean[log d_real + log(1 - d_fake)]; loss_g = -mean[log d_fake].
AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake);

/// Mean BCE of the counterfactual probabilities against `desired`.
double classifier_loss(std::span<const double> p_cf, Label desired);

struct Regularization {
  double l0 = 0.0;
  double l1 = 0.0;
  Series grad_l0;
  Series grad_l1;
};

/// l1 = sum|r| / (V T); l0 = sum tanh(|r| / eps) / (V T).
Regularization regularization_losses(const Series& residual, double eps_l0);

struct LossParts {
  std::array<double, 5> values{};  // same order as LossWeights
};

double composite_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace cfts::cf
