#include "cfts/shapelet/shapelet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace cfts::shapelet {

namespace {

constexpr double kIgTieTolerance = 1e-12;

double entropy_bits(std::size_t zeros, std::size_t ones) {
  const double n = static_cast<double>(zeros + ones);
  if (n == 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t c : {zeros, ones}) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> row_of(const Series& s, Eigen::Index v) {
  std::vector<double> out(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index t = 0; t < s.cols(); ++t) out[static_cast<std::size_t>(t)] = s(v, t);
  return out;
}

}  // namespace

Series MaskedSeries::indicator() const {
  Series m = Series::Zero(values.rows(), values.cols());
  for (const auto& r : regions) m.row(r.signal).segment(r.start, r.length).setOnes();
  return m;
}

double complexity(std::span<const double> seq) {
  if (seq.empty()) throw Error("complexity: empty sequence");
  double c = 0.0;
  for (std::size_t q = 1; q < seq.size(); ++q) c += std::abs(seq[q] - seq[q - 1]);
  return c;
}

double cid(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cid: length mismatch");
  if (a.empty()) throw Error("cid: empty sequence");
  double ss = 0.0;
  for (std::size_t q = 0; q < a.size(); ++q) {
    const double d = a[q] - b[q];
    ss += d * d;
  }
  const double ca = complexity(a);
  const double cb = complexity(b);
  const double cf = (std::max(ca, cb) + kCidEpsilon) / (std::min(ca, cb) + kCidEpsilon);
  return std::sqrt(ss) * cf;
}

MsdResult msd(std::span<const double> signal, std::span<const double> s) {
  const std::size_t T = signal.size();
  const std::size_t l = s.size();
  if (l == 0) throw Error("msd: empty subsequence");
  if (l > T) throw Error("msd: subsequence longer than signal");
  const double cs = complexity(s);

  MsdResult best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t j = 0; j + l <= T; ++j) {
    // CID >= ED because the correction factor is >= 1, so a window can be
    // abandoned once its partial squared ED exceeds the best CID squared.
    const double bound = best.distance * best.distance;
    double ss = 0.0;
    bool abandoned = false;
    for (std::size_t q = 0; q < l; ++q) {
      const double d = signal[j + q] - s[q];
      ss += d * d;
      if (ss > bound) {
        abandoned = true;
        break;
      }
    }
    if (abandoned) continue;
    double cw = 0.0;
    for (std::size_t q = 1; q < l; ++q) cw += std::abs(signal[j + q] - signal[j + q - 1]);
    const double cf = (std::max(cw, cs) + kCidEpsilon) / (std::min(cw, cs) + kCidEpsilon);
    const double dist = std::sqrt(ss) * cf;
    if (dist < best.distance) best = {dist, static_cast<Eigen::Index>(j)};
  }
  return best;
}

SplitResult information_gain(std::span<const double> distances, std::span<const Label> labels) {
  if (distances.size() != labels.size()) throw Error("information_gain: length mismatch");
  if (distances.empty()) throw Error("information_gain: empty input");
  const std::size_t n = distances.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
  });

  std::size_t total1 = 0;
  for (Label l : labels) total1 += l == 1 ? 1 : 0;
  const std::size_t total0 = n - total1;
  const double h_all = entropy_bits(total0, total1);

  SplitResult best{0.0, distances[order[0]]};
  bool found = false;
  std::size_t left0 = 0, left1 = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    (labels[order[i]] == 1 ? left1 : left0) += 1;
    const double lo = distances[order[i]];
    const double hi = distances[order[i + 1]];
    if (!(lo < hi)) continue;
    const double nl = static_cast<double>(i + 1);
    const double nr = static_cast<double>(n - i - 1);
    const double ig = h_all - (nl / static_cast<double>(n)) * entropy_bits(left0, left1) -
                      (nr / static_cast<double>(n)) * entropy_bits(total0 - left0, total1 - left1);
    if (!found || ig > best.ig + kIgTieTolerance) {
      best = {ig, (lo + hi) * 0.5};
      found = true;
    }
  }
  best.ig = std::clamp(best.ig, 0.0, h_all);
  return best;
}

double reconstruction_distance(std::span<const double> signal, Eigen::Index left, Eigen::Index right,
                               Eigen::Index t) {
  if (!(left < t && t < right)) throw Error("reconstruction_distance: t must lie strictly between left and right");
  if (left < 0 || static_cast<std::size_t>(right) >= signal.size()) {
    throw Error("reconstruction_distance: index out of range");
  }
  const double x0 = static_cast<double>(left), y0 = signal[static_cast<std::size_t>(left)];
  const double x1 = static_cast<double>(right), y1 = signal[static_cast<std::size_t>(right)];
  const double xt = static_cast<double>(t), yt = signal[static_cast<std::size_t>(t)];
  const double dx = x1 - x0, dy = y1 - y0;
  return std::abs(dy * (xt - x0) - dx * (yt - y0)) / std::sqrt(dx * dx + dy * dy);
}

std::vector<Eigen::Index> extract_pips(std::span<const double> signal, Eigen::Index k) {
  const auto T = static_cast<Eigen::Index>(signal.size());
  if (k < 2 || k > T) throw Error("extract_pips: k out of range");
  std::vector<Eigen::Index> pips{0, T - 1};
  while (static_cast<Eigen::Index>(pips.size()) < k) {
    double best = -1.0;
    Eigen::Index best_t = -1;
    for (std::size_t seg = 0; seg + 1 < pips.size(); ++seg) {
      for (Eigen::Index t = pips[seg] + 1; t < pips[seg + 1]; ++t) {
        const double d = reconstruction_distance(signal, pips[seg], pips[seg + 1], t);
        if (d > best) {
          best = d;
          best_t = t;
        }
      }
    }
    if (best_t < 0) break;
    pips.insert(std::upper_bound(pips.begin(), pips.end(), best_t), best_t);
  }
  return pips;
}

namespace {

struct Candidate {
  std::size_t instance;
  Eigen::Index signal;
  Eigen::Index start;
  Eigen::Index length;

  auto key() const { return std::tie(instance, signal, start, length); }
  bool operator<(const Candidate& o) const { return key() < o.key(); }
};

}  // namespace

ShapeletPool discover_pool(const MtsDataset& train, const DiscoveryConfig& cfg) {
  validate(train);
  if (train.count(0) == 0 || train.count(1) == 0) throw Error("discover_pool: both classes must be present");
  if (cfg.k_pips < 3) throw Error("discover_pool: k_pips must be >= 3");
  const auto V = train.meta.signals;
  const auto T = train.meta.length;
  const Eigen::Index k = std::min(cfg.k_pips, T);

  std::vector<std::vector<double>> rows;
  rows.reserve(train.size() * static_cast<std::size_t>(V));
  for (const auto& inst : train.instances) {
    for (Eigen::Index v = 0; v < V; ++v) rows.push_back(row_of(inst.values, v));
  }
  auto row = [&](std::size_t i, Eigen::Index v) -> const std::vector<double>& {
    return rows[i * static_cast<std::size_t>(V) + static_cast<std::size_t>(v)];
  };

  std::set<Candidate> unique;
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (Eigen::Index v = 0; v < V; ++v) {
      const auto& sig = row(i, v);
      std::vector<Eigen::Index> pips{0, T - 1};
      for (Eigen::Index j = 0; j + 2 < k; ++j) {
        // Grow the PIP set by one and read off the windows spanning three
        // consecutive PIPs that contain the new point.
        double best = -1.0;
        Eigen::Index p = -1;
        for (std::size_t seg = 0; seg + 1 < pips.size(); ++seg) {
          for (Eigen::Index t = pips[seg] + 1; t < pips[seg + 1]; ++t) {
            const double d = reconstruction_distance(sig, pips[seg], pips[seg + 1], t);
            if (d > best) {
              best = d;
              p = t;
            }
          }
        }
        if (p < 0) break;
        auto it = pips.insert(std::upper_bound(pips.begin(), pips.end(), p), p);
        const auto idx = static_cast<Eigen::Index>(it - pips.begin());
        const auto size = static_cast<Eigen::Index>(pips.size());
        for (Eigen::Index z = 0; z <= 2; ++z) {
          if (idx - z < 0 || idx + 2 - z > size - 1) continue;
          const Eigen::Index start = pips[static_cast<std::size_t>(idx - z)];
          const Eigen::Index end = pips[static_cast<std::size_t>(idx + 2 - z)];
          const Eigen::Index length = end - start + 1;
          if (length < 2) continue;
          if (cfg.max_length > 0 && length > cfg.max_length) continue;
          unique.insert(Candidate{i, v, start, length});
        }
      }
    }
  }
  if (unique.empty()) throw Error("discover_pool: no valid shapelet candidates");

  const std::vector<Candidate> cands(unique.begin(), unique.end());
  std::vector<Label> labels;
  labels.reserve(train.size());
  for (const auto& inst : train.instances) labels.push_back(inst.label);

  std::vector<SplitResult> scores(cands.size());
  auto score_range = [&](std::size_t begin, std::size_t end) {
    std::vector<double> dists(train.size());
    for (std::size_t c = begin; c < end; ++c) {
      const auto& cand = cands[c];
      std::span<const double> s(row(cand.instance, cand.signal).data() + cand.start,
                                static_cast<std::size_t>(cand.length));
      for (std::size_t i = 0; i < train.size(); ++i) dists[i] = msd(row(i, cand.signal), s).distance;
      scores[c] = information_gain(dists, labels);
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, cands.size() / 64));
  if (workers <= 1) {
    score_range(0, cands.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cands.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(cands.size(), b + chunk);
      if (b < e) pool.emplace_back(score_range, b, e);
    }
    for (auto& t : pool) t.join();
  }

  ShapeletPool out;
  out.per_class = cfg.per_class;
  for (Label cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (train[cands[c].instance].label == cls) idx.push_back(c);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a].ig != scores[b].ig) return scores[a].ig > scores[b].ig;
      if (cands[a].length != cands[b].length) return cands[a].length < cands[b].length;
      return std::tie(cands[a].instance, cands[a].signal, cands[a].start) <
             std::tie(cands[b].instance, cands[b].signal, cands[b].start);
    });
    if (idx.size() > cfg.per_class) idx.resize(cfg.per_class);
    for (std::size_t c : idx) {
      const auto& cand = cands[c];
      const auto& sig = row(cand.instance, cand.signal);
      Shapelet sh;
      sh.subsequence.values.assign(sig.begin() + cand.start, sig.begin() + cand.start + cand.length);
      sh.subsequence.signal = cand.signal;
      sh.subsequence.start = cand.start;
      sh.subsequence.length = cand.length;
      sh.class_label = cls;
      sh.ig = scores[c].ig;
      sh.osp = scores[c].osp;
      sh.source_instance = cand.instance;
      out.for_class(cls).push_back(std::move(sh));
    }
  }
  return out;
}

std::vector<Subsequence> extract_discriminative(const MtsInstance& query, const ShapeletPool& pool, Label label) {
  const auto& shapelets = pool.for_class(label);
  if (shapelets.empty()) throw Error("extract_discriminative: empty pool for class " + std::to_string(label));
  std::vector<Subsequence> out;
  out.reserve(shapelets.size());
  for (const auto& sh : shapelets) {
    const auto& s = sh.subsequence;
    if (s.signal >= query.signals() || s.length > query.length()) {
      throw Error("extract_discriminative: shapelet does not fit the query");
    }
    const auto sig = row_of(query.values, s.signal);
    const MsdResult m = msd(sig, s.values);
    Subsequence w;
    w.signal = s.signal;
    w.start = m.best_start;
    w.length = s.length;
    w.values.assign(sig.begin() + m.best_start, sig.begin() + m.best_start + s.length);
    out.push_back(std::move(w));
  }
  return out;
}

MaskedSeries mask_series(const MtsInstance& query, std::span<const Subsequence> regions) {
  const auto V = query.signals();
  const auto T = query.length();
  std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> spans(static_cast<std::size_t>(V));
  for (const auto& r : regions) {
    if (r.signal < 0 || r.signal >= V || r.start < 0 || r.length < 1 || r.start + r.length > T) {
      throw Error("mask_series: region out of bounds");
    }
    spans[static_cast<std::size_t>(r.signal)].emplace_back(r.start, r.start + r.length);
  }
  MaskedSeries out;
  out.source_id = query.id;
  out.values = Series::Zero(V, T);
  for (Eigen::Index v = 0; v < V; ++v) {
    auto& sv = spans[static_cast<std::size_t>(v)];
    std::sort(sv.begin(), sv.end());
    std::vector<std::pair<Eigen::Index, Eigen::Index>> merged;
    for (const auto& iv : sv) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, iv.second);
      } else {
        merged.push_back(iv);
      }
    }
    for (const auto& [b, e] : merged) {
      out.values.row(v).segment(b, e - b) = query.values.row(v).segment(b, e - b);
      out.regions.push_back(Region{v, b, e - b});
    }
  }
  return out;
}

void save_pool(const ShapeletPool& pool, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (Label cls : {0, 1}) {
    for (const auto& sh : pool.for_class(cls)) {
      arr.push_back({{"class", cls},
                     {"values", sh.subsequence.values},
                     {"source_signal", sh.subsequence.signal},
                     {"start", sh.subsequence.start},
                     {"length", sh.subsequence.length},
                     {"ig", sh.ig},
                     {"osp", sh.osp},
                     {"source_instance", sh.source_instance}});
    }
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << arr.dump(1) << '\n';
  if (!out) throw Error("I/O failure writing " + path.string());
}

ShapeletPool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  ShapeletPool pool;
  try {
    nlohmann::json arr;
    in >> arr;
    if (!arr.is_array()) throw Error(path.string() + ": expected a JSON array");
    for (const auto& j : arr) {
      Shapelet sh;
      sh.class_label = j.at("class").get<Label>();
      if (sh.class_label != 0 && sh.class_label != 1) throw Error(path.string() + ": class outside {0,1}");
      sh.subsequence.values = j.at("values").get<std::vector<double>>();
      sh.subsequence.signal = j.at("source_signal").get<Eigen::Index>();
      sh.subsequence.start = j.at("start").get<Eigen::Index>();
      sh.subsequence.length = j.at("length").get<Eigen::Index>();
      sh.ig = j.at("ig").get<double>();
      sh.osp = j.at("osp").get<double>();
      sh.source_instance = j.value("source_instance", std::size_t{0});
      if (static_cast<Eigen::Index>(sh.subsequence.values.size()) != sh.subsequence.length) {
        throw Error(path.string() + ": values length does not match 'length'");
      }
      pool.for_class(sh.class_label).push_back(std::move(sh));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed pool file " + path.string() + ": " + e.what());
  }
  pool.per_class = std::max(pool.class0.size(), pool.class1.size());
  return pool;
}

}  // namespace cfts::shapelet
