#include "cfts/cf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfts/nn/losses.hpp"

namespace cfts::cf {

std::vector<std::size_t> nearest_like(const Series& query, Label query_pred, const MtsDataset& train,
                                      std::span<const Label> train_pred, std::size_t n) {
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train_pred[i] == query_pred) cand.emplace_back(squared_l2(query, train[i].values), i);
  }
  if (cand.size() < n) {
    throw Error("sample_triplets: only " + std::to_string(cand.size()) + " instances share the query's class, need " +
                std::to_string(n));
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end());
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = cand[i].second;
  return out;
}

std::vector<std::size_t> random_unlike(Label query_pred, std::span<const Label> train_pred, std::size_t n,
                                       std::mt19937_64& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < train_pred.size(); ++i) {
    if (train_pred[i] != query_pred) pool.push_back(i);
  }
  if (pool.size() < n) {
    throw Error("sample_triplets: only " + std::to_string(pool.size()) +
                " instances differ from the query's class, need " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

TripletBatch sample_triplets(std::span<const Series> queries, std::span<const Label> query_pred,
                             const MtsDataset& train, std::span<const Label> train_pred, std::size_t n,
                             std::mt19937_64& rng) {
  if (n == 0) throw Error("sample_triplets: n must be >= 1");
  if (queries.size() != query_pred.size() || train.size() != train_pred.size()) {
    throw Error("sample_triplets: prediction count mismatch");
  }
  TripletBatch batch;
  batch.n = n;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    Triplet t;
    t.factuals = nearest_like(queries[q], query_pred[q], train, train_pred, n);
    t.counterfactuals = random_unlike(query_pred[q], train_pred, n, rng);
    batch.triplets.push_back(std::move(t));
  }
  return batch;
}

TripletBatch sample_triplets(std::span<const Series> queries, const MtsDataset& train,
                             const nn::SequenceClassifier& classifier, std::size_t n, std::uint64_t seed) {
  std::vector<Label> qp, tp;
  for (const auto& q : queries) qp.push_back(classifier.predict(q));
  for (const auto& inst : train.instances) tp.push_back(classifier.predict(inst.values));
  std::mt19937_64 rng(seed);
  return sample_triplets(queries, qp, train, tp, n, rng);
}

double mean_manhattan(const Series& x, std::span<const Series* const> set) {
  if (set.empty()) throw Error("triplet_loss: empty example set");
  double s = 0.0;
  for (const auto* e : set) {
    if (e->rows() != x.rows() || e->cols() != x.cols()) throw Error("triplet_loss: shape mismatch");
    s += (x - *e).cwiseAbs().sum();
  }
  return s / static_cast<double>(set.size());
}

namespace {

Series mean_sign(const Series& x, std::span<const Series* const> set) {
  Series g = Series::Zero(x.rows(), x.cols());
  for (const auto* e : set) g += (x - *e).unaryExpr([](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); });
  return g / static_cast<double>(set.size());
}

std::vector<const Series*> pointers(std::span<const Series> s) {
  std::vector<const Series*> out;
  for (const auto& e : s) out.push_back(&e);
  return out;
}

}  // namespace

TripletLoss triplet_loss(const Series& anchor, std::span<const Series* const> positives,
                         std::span<const Series* const> negatives, double gamma) {
  TripletLoss r;
  r.d_pos = mean_manhattan(anchor, positives);
  r.d_neg = mean_manhattan(anchor, negatives);
  const double raw = r.d_pos - r.d_neg + gamma;
  r.value = std::max(0.0, raw);
  if (raw > 0) {
    r.grad = mean_sign(anchor, positives) - mean_sign(anchor, negatives);
  } else {
    r.grad = Series::Zero(anchor.rows(), anchor.cols());
  }
  return r;
}

TripletLoss triplet_loss(const Series& anchor, std::span<const Series> positives, std::span<const Series> negatives,
                         double gamma) {
  const auto p = pointers(positives);
  const auto n = pointers(negatives);
  return triplet_loss(anchor, std::span<const Series* const>(p), std::span<const Series* const>(n), gamma);
}

MarginSet central_margin(double mean_d_neg, double mean_d_pos) {
  MarginSet m;
  const double gc = 0.5 * std::abs(mean_d_neg - mean_d_pos);
  if (!(gc >= 1e-9) || !std::isfinite(gc)) return m;
  m.degenerate = false;
  m.gamma_central = gc;
  m.delta = std::pow(10.0, std::floor(std::log10(gc)));
  m.candidates = {gc - m.delta, gc, gc + m.delta, gc + 2.0 * m.delta};
  return m;
}

MarginSet central_margin(std::span<const double> d_neg, std::span<const double> d_pos) {
  if (d_neg.empty() || d_pos.empty()) throw Error("central_margin: empty sample");
  const double neg = std::accumulate(d_neg.begin(), d_neg.end(), 0.0) / static_cast<double>(d_neg.size());
  const double pos = std::accumulate(d_pos.begin(), d_pos.end(), 0.0) / static_cast<double>(d_pos.size());
  return central_margin(neg, pos);
}

AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  AdversarialLosses r;
  if (!d_real.empty()) {
    double s = 0;
    for (double p : d_real) s += std::log(nn::clamp_prob(p));
    r.loss_d -= s / static_cast<double>(d_real.size());
  }
  if (!d_fake.empty()) {
    double s = 0, g = 0;
    for (double p : d_fake) {
      s += std::log(1.0 - nn::clamp_prob(p));
      g += std::log(nn::clamp_prob(p));
    }
    r.loss_d -= s / static_cast<double>(d_fake.size());
    r.loss_g = -g / static_cast<double>(d_fake.size());
  }
  return r;
}

double classifier_loss(std::span<const double> p_cf, Label desired) {
  if (p_cf.empty()) return 0.0;
  double s = 0;
  for (double p : p_cf) s += nn::bce(p, desired);
  return s / static_cast<double>(p_cf.size());
}

Regularization regularization_losses(const Series& r, double eps_l0) {
  if (!r.allFinite()) throw Error("regularization_losses: non-finite residual");
  const double cells = static_cast<double>(r.size());
  Regularization out;
  const Series sign = r.unaryExpr([](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); });
  const Series th = (r.cwiseAbs() / eps_l0).array().tanh().matrix();
  out.l1 = r.cwiseAbs().sum() / cells;
  out.l0 = th.sum() / cells;
  out.grad_l1 = sign / cells;
  out.grad_l0 = sign.cwiseProduct((1.0 - th.array().square()).matrix()) / (eps_l0 * cells);
  return out;
}

double composite_loss(const LossParts& parts, const LossWeights& weights) {
  double s = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    if (weights.lambda[k] != 0.0) s += weights.lambda[k] * parts.values[k];
  }
  return s;
}

}  // namespace cfts::cf
