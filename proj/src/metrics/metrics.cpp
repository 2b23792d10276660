#include "cfts/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfts::metrics {

namespace {

void same_shape(const Series& a, const Series& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(std::string(what) + ": shape mismatch");
}

double euclid(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

constexpr double kLofFloor = 1e-12;

}  // namespace

double tcv(std::span<const cf::CfResult> results) {
  if (results.empty()) throw Error("tcv: no results");
  const auto n = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.flipped; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(results.size());
}

double proximity(const Series& query, const Series& x_cf) {
  same_shape(query, x_cf, "proximity");
  return (x_cf - query).cwiseAbs().sum() / static_cast<double>(query.size());
}

double sparsity(const Series& query, const Series& x_cf, double tau) {
  same_shape(query, x_cf, "sparsity");
  return static_cast<double>(((x_cf - query).array().abs() > tau).count()) / static_cast<double>(query.size());
}

std::vector<double> flatten(const Series& s) { return {s.data(), s.data() + s.size()}; }

LofModel::LofModel(std::vector<std::vector<double>> baseline, std::size_t k) : base_(std::move(baseline)), k_(k) {
  if (k_ < 1 || k_ >= base_.size()) {
    throw Error("lof: need 1 <= k < baseline size (k=" + std::to_string(k_) + ", n=" + std::to_string(base_.size()) +
                ")");
  }
  const std::size_t n = base_.size();
  std::vector<std::vector<std::size_t>> nn(n);
  k_distance_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    nn[i] = neighbors(base_[i], static_cast<long>(i), &d);
    k_distance_[i] = d.back();
  }
  lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (auto o : nn[i]) sum += std::max(k_distance_[o], euclid(base_[i], base_[o]));
    lrd_[i] = 1.0 / std::max(sum / static_cast<double>(k_), kLofFloor);
  }
}

std::vector<std::size_t> LofModel::neighbors(std::span<const double> p, long exclude, std::vector<double>* dist) const {
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(base_.size());
  for (std::size_t i = 0; i < base_.size(); ++i) {
    if (static_cast<long>(i) == exclude) continue;
    if (base_[i].size() != p.size()) throw Error("lof: dimension mismatch");
    all.emplace_back(euclid(p, base_[i]), i);
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_), all.end());
  std::vector<std::size_t> out(k_);
  if (dist) dist->resize(k_);
  for (std::size_t j = 0; j < k_; ++j) {
    out[j] = all[j].second;
    if (dist) (*dist)[j] = all[j].first;
  }
  return out;
}

double LofModel::score(std::span<const double> point) const {
  std::vector<double> d;
  const auto nn = neighbors(point, -1, &d);
  double reach = 0.0, ratio = 0.0;
  for (std::size_t j = 0; j < k_; ++j) {
    reach += std::max(k_distance_[nn[j]], d[j]);
    ratio += lrd_[nn[j]];
  }
  const double own = 1.0 / std::max(reach / static_cast<double>(k_), kLofFloor);
  return ratio / static_cast<double>(k_) / own;
}

double lof(std::span<const double> point, const std::vector<std::vector<double>>& baseline, std::size_t k) {
  return LofModel(baseline, k).score(point);
}

double plausibility(std::span<const cf::CfResult> results, const MtsDataset& baseline, std::size_t k, double theta) {
  if (results.empty()) throw Error("plausibility: no results");
  std::vector<std::vector<double>> base;
  for (const auto& inst : baseline.instances) base.push_back(flatten(inst.values));
  const LofModel model(std::move(base), k);
  std::size_t outliers = 0;
  for (const auto& r : results) outliers += model.score(flatten(r.x_cf)) > theta;
  return static_cast<double>(outliers) / static_cast<double>(results.size());
}

Robustness robustness(double p_cf, Label desired) {
  return {desired == 0 ? p_cf : 1.0 - p_cf, std::abs(p_cf - 0.5)};
}

RunMetrics evaluate(std::span<const cf::CfResult> results, const MtsDataset& baseline, Label desired,
                    const cf::TrainConfig& cfg) {
  if (results.empty()) throw Error("eval: no counterfactuals to evaluate");
  RunMetrics m;
  m.tcv = tcv(results);
  const double n = static_cast<double>(results.size());
  for (const auto& r : results) {
    const auto rb = robustness(r.p_cf, desired);
    m.robustness += rb.p_report / n;
    m.boundary_dist += rb.boundary_dist / n;
    m.proximity += proximity(r.query, r.x_cf) / n;
    m.sparsity += sparsity(r.query, r.x_cf, cfg.sparsity_tau) / n;
  }
  m.plausibility = plausibility(results, baseline, cfg.lof.k, cfg.lof.theta);
  return m;
}

Stat mean_std(std::span<const double> v) {
  if (v.empty()) throw Error("aggregate: no runs");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

MetricsReport aggregate(std::span<const RunMetrics> runs, const std::string& name) {
  if (runs.empty()) throw Error("aggregate: no runs");
  auto col = [&](double RunMetrics::*f) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*f);
    return mean_std(v);
  };
  MetricsReport rep;
  rep.name = name;
  rep.runs = runs.size();
  rep.tcv = col(&RunMetrics::tcv);
  rep.robustness = col(&RunMetrics::robustness);
  rep.boundary_dist = col(&RunMetrics::boundary_dist);
  rep.proximity = col(&RunMetrics::proximity);
  rep.sparsity = col(&RunMetrics::sparsity);
  rep.plausibility = col(&RunMetrics::plausibility);
  return rep;
}

std::vector<NoisePoint> noise_stability(std::span<const MtsInstance> queries, const cf::ModelBundle& bundle,
                                        const shapelet::ShapeletPool* pool, const nn::SequenceClassifier& classifier,
                                        std::span<const double> scales, std::uint64_t seed) {
  if (queries.empty()) throw Error("noise_stability: no queries");
  const Label desired = bundle.config.desired_label();
  std::vector<NoisePoint> out;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const auto results = cf::generate_cfs(queries, bundle, pool, classifier, scales[s], mix_seed(seed, s));
    NoisePoint p;
    p.scale = scales[s];
    for (const auto& r : results) {
      const auto rb = robustness(r.p_cf, desired);
      p.p_report += rb.p_report / static_cast<double>(results.size());
      p.boundary_dist += rb.boundary_dist / static_cast<double>(results.size());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace cfts::metrics
