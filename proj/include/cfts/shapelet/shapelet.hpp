#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cfts/core/series.hpp"

namespace cfts::shapelet {

/// Additive guard in the complexity correction factor; makes the factor 1
/// when both sequences are constant.
inline constexpr double kCidEpsilon = 1e-8;

/// A window [start, start + length) of one signal. Indices are 0-based.
struct Subsequence {
  std::vector<double> values;
  Eigen::Index signal = 0;
  Eigen::Index start = 0;
  Eigen::Index length = 0;
};

struct Shapelet {
  Subsequence subsequence;
  Label class_label = 0;
  double ig = 0.0;   // bits
  double osp = 0.0;  // split threshold in CID units
  std::size_t source_instance = 0;
};

struct ShapeletPool {
  std::size_t per_class = 0;
  std::vector<Shapelet> class0;
  std::vector<Shapelet> class1;

  const std::vector<Shapelet>& for_class(Label l) const { return l == 0 ? class0 : class1; }
  std::vector<Shapelet>& for_class(Label l) { return l == 0 ? class0 : class1; }
  std::size_t size() const { return class0.size() + class1.size(); }
};

/// Region kept by the mask: [start, start + length) on `signal`.
struct Region {
  Eigen::Index signal = 0;
  Eigen::Index start = 0;
  Eigen::Index length = 0;

  friend bool operator==(const Region&, const Region&) = default;
};

struct MaskedSeries {
  Series values;
  std::vector<Region> regions;  // merged, sorted by (signal, start)
  std::string source_id;

  /// 1.0 inside the regions, 0.0 elsewhere.
  Series indicator() const;
};

/// Sum of absolute first differences.
double complexity(std::span<const double> seq);

/// Complexity-invariant distance.
double cid(std::span<const double> a, std::span<const double> b);

struct MsdResult {
  double distance = 0.0;
  Eigen::Index best_start = 0;
};

/// Minimum CID of `s` over every window of `signal`; earliest start on ties.
MsdResult msd(std::span<const double> signal, std::span<const double> s);

struct SplitResult {
  double ig = 0.0;
  double osp = 0.0;
};

/// Best binary split of `distances` (d <= osp vs d > osp) by information gain
/// in bits. Candidate thresholds are midpoints between consecutive distinct
/// sorted distances; ties on IG go to the smaller threshold.
SplitResult information_gain(std::span<const double> distances, std::span<const Label> labels);

/// Perpendicular distance from (t, signal[t]) to the line through the points
/// at `left` and `right`, in (index, value) coordinates.
double reconstruction_distance(std::span<const double> signal, Eigen::Index left, Eigen::Index right,
                               Eigen::Index t);

/// Sorted PIP indices, always containing 0 and T-1.
std::vector<Eigen::Index> extract_pips(std::span<const double> signal, Eigen::Index k);

struct DiscoveryConfig {
  Eigen::Index k_pips = 5;
  std::size_t per_class = 5;
  Eigen::Index max_length = 0;  // 0: unbounded
};

/// Offline PIP-driven shapelet discovery over the whole training set.
ShapeletPool discover_pool(const MtsDataset& train, const DiscoveryConfig& cfg);

/// Best-matching window of `query` for every shapelet of class `label`.
std::vector<Subsequence> extract_discriminative(const MtsInstance& query, const ShapeletPool& pool,
                                                Label label);

MaskedSeries mask_series(const MtsInstance& query, std::span<const Subsequence> regions);

void save_pool(const ShapeletPool& pool, const std::filesystem::path& path);
ShapeletPool load_pool(const std::filesystem::path& path);

}  // namespace cfts::shapelet
