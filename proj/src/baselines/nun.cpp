#include "cfts/baselines/nun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfts::baselines {

std::size_t find_nun_index(const Series& query, Label query_pred, const MtsDataset& train,
                           std::span<const Label> train_pred) {
  if (train_pred.size() != train.size()) throw Error("find_nun: prediction count mismatch");
  double best = std::numeric_limits<double>::infinity();
  std::size_t at = train.size();
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train_pred[i] == query_pred) continue;
    const double d = squared_l2(query, train[i].values);
    if (d < best) {
      best = d;
      at = i;
    }
  }
  if (at == train.size()) throw Error("find_nun: no instance with a different prediction");
  return at;
}

const MtsInstance& find_nun(const MtsInstance& query, const MtsDataset& train,
                            const nn::SequenceClassifier& classifier) {
  const auto pred = cf::predict_all(classifier, train);
  return train[find_nun_index(query.values, classifier.predict(query.values), train, pred)];
}

namespace {

double binary_entropy(double p) {
  double h = 0.0;
  for (double q : {p, 1.0 - p}) {
    if (q > 0) h -= q * std::log2(q);
  }
  return h;
}

}  // namespace

NunResult nun_substitute_cf(const MtsInstance& query, const MtsInstance& nun,
                            const nn::SequenceClassifier& classifier, Eigen::Index window_len,
                            std::size_t max_segments) {
  const auto T = query.length();
  if (nun.signals() != query.signals() || nun.length() != T) throw Error("nun: shape mismatch");
  if (window_len < 1 || window_len > T) throw Error("nun: window_len must be in [1, T]");

  // Non-overlapping windows; the last one may be shorter.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> windows;
  for (Eigen::Index s = 0; s < T; s += window_len) windows.emplace_back(s, std::min(window_len, T - s));

  std::vector<Series> isolated;
  for (const auto& [s, l] : windows) {
    Series iso = Series::Zero(query.signals(), T);
    iso.middleCols(s, l) = query.values.middleCols(s, l);
    isolated.push_back(std::move(iso));
  }
  const auto p_iso = classifier.forward(isolated, nullptr);
  std::vector<std::size_t> rank(windows.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return binary_entropy(p_iso(static_cast<Eigen::Index>(a))) > binary_entropy(p_iso(static_cast<Eigen::Index>(b)));
  });

  NunResult out;
  auto& r = out.result;
  r.id = query.id;
  r.query = query.values;
  r.p_orig = classifier.predict_proba(query.values);
  const bool orig_class = r.p_orig >= 0.5;
  Series x = query.values;
  double p = r.p_orig;
  for (std::size_t k = 0; k < rank.size() && k < max_segments; ++k) {
    const auto [s, l] = windows[rank[k]];
    x.middleCols(s, l) = nun.values.middleCols(s, l);
    p = classifier.predict_proba(x);
    out.segments_used = k + 1;
    if ((p >= 0.5) != orig_class) break;
  }
  if ((p >= 0.5) == orig_class) {
    x = nun.values;
    p = classifier.predict_proba(x);
    out.fallback = true;
  }
  r.x_cf = x;
  r.residual = x - query.values;
  r.p_cf = p;
  r.flipped = (p >= 0.5) != orig_class;
  return out;
}

}  // namespace cfts::baselines
