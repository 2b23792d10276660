#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfts/cf/train.hpp"
#include "cfts/core/series.hpp"

namespace cfts::metrics {

/// Percentage of results whose prediction flipped.
double tcv(std::span<const cf::CfResult> results);

/// sum |x_cf - query| / (V T).
double proximity(const Series& query, const Series& x_cf);

/// Fraction of cells changed by more than tau.
double sparsity(const Series& query, const Series& x_cf, double tau = 1e-6);

/// Local outlier factor against a fixed baseline. Neighborhoods hold exactly
/// k points (ties by baseline index); baseline members never count
/// themselves as neighbors.
class LofModel {
 public:
  LofModel(std::vector<std::vector<double>> baseline, std::size_t k);

  double score(std::span<const double> point) const;
  std::size_t k() const { return k_; }

 private:
  std::vector<std::size_t> neighbors(std::span<const double> p, long exclude, std::vector<double>* dist) const;

  std::vector<std::vector<double>> base_;
  std::size_t k_;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
};

double lof(std::span<const double> point, const std::vector<std::vector<double>>& baseline, std::size_t k);

std::vector<double> flatten(const Series& s);

/// Fraction of counterfactuals with LOF above theta.
double plausibility(std::span<const cf::CfResult> results, const MtsDataset& baseline, std::size_t k, double theta);

struct Robustness {
  double p_report = 0.5;       // probability of the undesired class; lower is better
  double boundary_dist = 0.0;  // |p_cf - 0.5|; higher is better
};

Robustness robustness(double p_cf, Label desired);

struct RunMetrics {
  double tcv = 0.0;
  double robustness = 0.0;  // mean p_report
  double boundary_dist = 0.0;
  double proximity = 0.0;
  double sparsity = 0.0;
  double plausibility = 0.0;
};

RunMetrics evaluate(std::span<const cf::CfResult> results, const MtsDataset& baseline, Label desired,
                    const cf::TrainConfig& cfg);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population
};

Stat mean_std(std::span<const double> values);

struct MetricsReport {
  std::string name;
  std::size_t runs = 0;
  Stat tcv, robustness, boundary_dist, proximity, sparsity, plausibility;
};

MetricsReport aggregate(std::span<const RunMetrics> runs, const std::string& name = "");

struct NoisePoint {
  double scale = 0.0;
  double p_report = 0.0;
  double boundary_dist = 0.0;
};

/// Regenerates the counterfactuals with seeded Gaussian noise on the
/// generator input at each scale.
std::vector<NoisePoint> noise_stability(std::span<const MtsInstance> queries, const cf::ModelBundle& bundle,
                                        const shapelet::ShapeletPool* pool, const nn::SequenceClassifier& classifier,
                                        std::span<const double> scales, std::uint64_t seed);

}  // namespace cfts::metrics
