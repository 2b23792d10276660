#include "cfts/cf/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cfts/baselines/variant.hpp"
#include "cfts/cf/losses.hpp"
#include "cfts/nn/losses.hpp"

namespace cfts::cf {

using nlohmann::json;

namespace {

// RNG stream ids derived from the run seed.
enum Stream : std::uint64_t {
  kClassifierInit = 1,
  kClassifierShuffle = 2,
  kMarginSample = 3,
  kGeneratorInit = 10,
  kDiscriminatorInit = 11,
  kTrainLoop = 12,
};

std::vector<Series> gather(const MtsDataset& ds, std::span<const std::size_t> idx) {
  std::vector<Series> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds[i].values);
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error("I/O failure writing " + path.string());
}

json network_json(const nn::NetworkSpec& spec, std::uint64_t seed, nn::ParamRefs params, const nn::Adam& opt) {
  return {{"network", nn::spec_to_json(spec)},
          {"seed", seed},
          {"params", nn::params_to_json(params)},
          {"optimizer", opt.to_json()}};
}

void check_shape(const MtsDataset& ds, const nn::NetworkSpec& spec, const std::string& what) {
  if (ds.meta.signals != spec.signals || ds.meta.length != spec.length) {
    throw Error(what + ": dataset shape " + std::to_string(ds.meta.signals) + "x" + std::to_string(ds.meta.length) +
                " does not match the model's " + std::to_string(spec.signals) + "x" + std::to_string(spec.length));
  }
}

}  // namespace

// ---- classifier ----------------------------------------------------------

ClassifierBundle train_classifier(const MtsDataset& train, const ClassifierSettings& s, std::uint64_t seed) {
  validate(train);
  if (train.count(0) == 0 || train.count(1) == 0) throw Error("train-classifier: both classes must be present");
  ClassifierBundle b;
  b.seed = seed;
  b.model = nn::SequenceClassifier({nn::NetworkKind::classifier, train.meta.signals, train.meta.length, s.hidden_size},
                                   mix_seed(seed, kClassifierInit));
  b.optimizer = nn::Adam({s.lr});
  std::mt19937_64 rng(mix_seed(seed, kClassifierShuffle));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  auto params = b.model.parameters();
  for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
      const std::size_t end = std::min(order.size(), start + s.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto xs = gather(train, idx);
      nn::SequenceClassifier::Cache cache;
      const auto p = b.model.forward(xs, &cache);
      Eigen::RowVectorXd d(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        d(i) = (p(i) - train[idx[static_cast<std::size_t>(i)]].label) / static_cast<double>(p.size());
      }
      nn::zero_grad(params);
      b.model.backward(cache, d, {true, false});
      if (!b.optimizer.step(params)) throw Error("train-classifier: non-finite gradient");
    }
  }
  const auto pred = predict_all(b.model, train);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < train.size(); ++i) ok += pred[i] == train[i].label;
  b.train_accuracy = static_cast<double>(ok) / static_cast<double>(train.size());
  return b;
}

std::vector<Label> predict_all(const nn::SequenceClassifier& c, const MtsDataset& ds) {
  std::vector<Label> out;
  out.reserve(ds.size());
  constexpr std::size_t chunk = 128;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    std::vector<Series> xs;
    for (std::size_t i = start; i < std::min(ds.size(), start + chunk); ++i) xs.push_back(ds[i].values);
    const auto p = c.forward(xs, nullptr);
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(p(i) >= 0.5 ? 1 : 0);
  }
  return out;
}

void save_classifier(const ClassifierBundle& b, const std::filesystem::path& path) {
  auto model = b.model;
  json j = network_json(model.spec(), b.seed, model.parameters(), b.optimizer);
  j["train_accuracy"] = b.train_accuracy;
  write_json(j, path);
}

ClassifierBundle load_classifier(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    ClassifierBundle b;
    const auto spec = nn::spec_from_json(j.at("network"));
    if (spec.kind != nn::NetworkKind::classifier) throw Error(path.string() + ": not a classifier");
    b.seed = j.at("seed").get<std::uint64_t>();
    b.model = nn::SequenceClassifier(spec, 0);
    auto params = b.model.parameters();
    nn::params_from_json(j.at("params"), params);
    b.optimizer.from_json(j.at("optimizer"), params);
    b.train_accuracy = j.value("train_accuracy", 0.0);
    return b;
  } catch (const json::exception& e) {
    throw Error("malformed classifier file " + path.string() + ": " + e.what());
  }
}

// ---- generator bundle ----------------------------------------------------

void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
  auto g = b.generator;
  auto d = b.discriminator;
  json gj = network_json(g.spec(), b.seed, g.parameters(), b.g_opt);
  gj["config"] = config_to_json(b.config);
  gj["gamma"] = b.gamma;
  gj["margin_candidates"] = b.margin_candidates;
  write_json(gj, dir / "generator.json");
  write_json(network_json(d.spec(), b.seed, d.parameters(), b.d_opt), dir / "discriminator.json");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  const json gj = read_json(dir / "generator.json");
  const json dj = read_json(dir / "discriminator.json");
  try {
    ModelBundle b;
    b.config = config_from_json(gj.at("config"));
    b.seed = gj.at("seed").get<std::uint64_t>();
    b.gamma = gj.at("gamma").get<double>();
    b.margin_candidates = gj.at("margin_candidates").get<std::vector<double>>();
    const auto gs = nn::spec_from_json(gj.at("network"));
    const auto ds = nn::spec_from_json(dj.at("network"));
    if (gs.kind != nn::NetworkKind::generator || ds.kind != nn::NetworkKind::discriminator) {
      throw Error("model directory " + dir.string() + " holds the wrong network kinds");
    }
    b.generator = nn::Generator(gs, 0);
    b.discriminator = nn::SequenceClassifier(ds, 0);
    auto gp = b.generator.parameters();
    auto dp = b.discriminator.parameters();
    nn::params_from_json(gj.at("params"), gp);
    nn::params_from_json(dj.at("params"), dp);
    b.g_opt.from_json(gj.at("optimizer"), gp);
    b.d_opt.from_json(dj.at("optimizer"), dp);
    return b;
  } catch (const json::exception& e) {
    throw Error("malformed model files in " + dir.string() + ": " + e.what());
  }
}

// ---- training ------------------------------------------------------------

PreparedQuery prepare_query(const MtsInstance& query, const shapelet::ShapeletPool* pool, Label pool_label,
                            const TrainConfig& cfg) {
  PreparedQuery p;
  if (cfg.use_shapelet) {
    if (pool == nullptr) throw Error("shapelet pool required when use_shapelet is set");
    const auto windows = shapelet::extract_discriminative(query, *pool, pool_label);
    auto masked = shapelet::mask_series(query, windows);
    p.indicator = cfg.mask_residuals ? masked.indicator() : Series::Ones(query.signals(), query.length());
    p.generator_input = std::move(masked.values);
    p.regions = std::move(masked.regions);
  } else {
    p.generator_input = query.values;
    p.indicator = Series::Ones(query.signals(), query.length());
  }
  return p;
}

namespace {

struct TripletSets {
  std::vector<const Series*> positives;
  std::vector<const Series*> negatives;
};

TripletSets orient(const MtsDataset& train, const Triplet& t, TripletOrientation o) {
  TripletSets s;
  for (auto i : t.factuals) s.positives.push_back(&train[i].values);
  for (auto i : t.counterfactuals) s.negatives.push_back(&train[i].values);
  if (o == TripletOrientation::toward_desired) std::swap(s.positives, s.negatives);
  return s;
}

}  // namespace

MarginSet initial_margin(const MtsDataset& train, const nn::SequenceClassifier& classifier, const TrainConfig& cfg) {
  if (cfg.margin.mode == MarginMode::fixed) {
    MarginSet m;
    m.gamma_central = cfg.margin.gamma;
    m.candidates = cfg.margin.candidates.empty() ? std::vector<double>{cfg.margin.gamma} : cfg.margin.candidates;
    m.degenerate = false;
    return m;
  }
  const auto pred = predict_all(classifier, train);
  std::mt19937_64 rng(mix_seed(cfg.seed, kMarginSample));
  std::vector<double> d_pos, d_neg;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label != cfg.queried_label) continue;
    Triplet t;
    t.factuals = nearest_like(train[i].values, pred[i], train, pred, cfg.triplet_n);
    t.counterfactuals = random_unlike(pred[i], pred, cfg.triplet_n, rng);
    const auto sets = orient(train, t, cfg.triplet_orientation);
    d_pos.push_back(mean_manhattan(train[i].values, sets.positives));
    d_neg.push_back(mean_manhattan(train[i].values, sets.negatives));
  }
  return central_margin(d_neg, d_pos);
}

ModelBundle train(const MtsDataset& train, const shapelet::ShapeletPool* pool,
                  const nn::SequenceClassifier& classifier_in, const TrainConfig& cfg_in) {
  validate(train);
  validate(cfg_in);
  const auto variant = baselines::derive_variant(cfg_in);
  const TrainConfig cfg = baselines::effective_config(cfg_in);
  check_shape(train, classifier_in.spec(), "train");
  if (cfg.use_shapelet && pool == nullptr) throw Error("train: shapelet pool required when use_shapelet is set");

  const auto V = train.meta.signals;
  const auto T = train.meta.length;
  const Label desired = cfg.desired_label();
  nn::SequenceClassifier classifier = classifier_in;
  const auto train_pred = predict_all(classifier, train);

  std::vector<std::size_t> queried, reference;
  for (std::size_t i = 0; i < train.size(); ++i) (train[i].label == cfg.queried_label ? queried : reference).push_back(i);
  if (queried.empty() || reference.empty()) throw Error("train: both classes must be present");

  ModelBundle b;
  b.config = cfg;
  b.seed = cfg.seed;
  const auto margin = initial_margin(train, classifier, cfg);
  b.gamma = margin.gamma_central;
  b.margin_candidates = margin.candidates;

  double output_scale = 1.0;
  if (!variant.residual) {
    for (const auto& inst : train.instances) output_scale = std::max(output_scale, inst.values.cwiseAbs().maxCoeff());
  }
  b.generator = nn::Generator({nn::NetworkKind::generator, V, T, cfg.hidden_size, variant.head, output_scale},
                              mix_seed(cfg.seed, kGeneratorInit));
  b.discriminator = nn::SequenceClassifier({nn::NetworkKind::discriminator, V, T, cfg.hidden_size},
                                           mix_seed(cfg.seed, kDiscriminatorInit));
  b.g_opt = nn::Adam({cfg.lr});
  b.d_opt = nn::Adam({cfg.lr});

  std::vector<PreparedQuery> prepared;
  std::vector<std::vector<std::size_t>> factuals;
  const bool need_triplets = cfg.use_triplet && cfg.weights.lambda[0] > 0;
  for (auto q : queried) {
    prepared.push_back(prepare_query(train[q], pool, cfg.queried_label, cfg));
    if (need_triplets) factuals.push_back(nearest_like(train[q].values, train_pred[q], train, train_pred, cfg.triplet_n));
  }

  std::mt19937_64 rng(mix_seed(cfg.seed, kTrainLoop));
  std::vector<std::size_t> order(queried.size());
  std::iota(order.begin(), order.end(), 0);
  auto gp = b.generator.parameters();
  auto dp = b.discriminator.parameters();
  const auto& lambda = cfg.weights.lambda;
  std::uniform_int_distribution<std::size_t> pick_real(0, reference.size() - 1);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t flipped = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t B = std::min(order.size(), start + cfg.batch_size) - start;
      const double inv_b = 1.0 / static_cast<double>(B);
      std::vector<Series> inputs;
      for (std::size_t k = 0; k < B; ++k) inputs.push_back(prepared[order[start + k]].generator_input);

      nn::Generator::Cache gcache;
      const auto out = b.generator.forward(inputs, &gcache);
      std::vector<Series> x_cf(B), delta(B);
      for (std::size_t k = 0; k < B; ++k) {
        const auto& pq = prepared[order[start + k]];
        const Series& x = train[queried[order[start + k]]].values;
        if (variant.residual) {
          delta[k] = out[k].cwiseProduct(pq.indicator);
          x_cf[k] = x + delta[k];
        } else {
          x_cf[k] = out[k];
          delta[k] = x_cf[k] - x;
        }
      }

      nn::SequenceClassifier::Cache dcache, ccache;
      const auto d_fake = b.discriminator.forward(x_cf, &dcache);
      const auto p_cf = classifier.forward(x_cf, &ccache);

      std::vector<Series> grad(B, Series::Zero(V, T));
      std::array<double, 5> parts{};

      if (need_triplets) {
        for (std::size_t k = 0; k < B; ++k) {
          const std::size_t qi = order[start + k];
          Triplet t{factuals[qi], random_unlike(train_pred[queried[qi]], train_pred, cfg.triplet_n, rng)};
          const auto sets = orient(train, t, cfg.triplet_orientation);
          const auto tl = triplet_loss(x_cf[k], sets.positives, sets.negatives, b.gamma);
          parts[0] += tl.value * inv_b;
          grad[k] += (lambda[0] * inv_b) * tl.grad;
        }
      }
      std::vector<double> fake_probs(d_fake.data(), d_fake.data() + d_fake.size());
      parts[1] = adversarial_losses({}, fake_probs).loss_g;
      if (lambda[1] > 0) {
        Eigen::RowVectorXd dl = (d_fake.array() - 1.0) * (lambda[1] * inv_b);
        const auto g = b.discriminator.backward(dcache, dl, {false, true});
        for (std::size_t k = 0; k < B; ++k) grad[k] += g[k];
      }
      std::vector<double> cls_probs(p_cf.data(), p_cf.data() + p_cf.size());
      parts[2] = classifier_loss(cls_probs, desired);
      if (cfg.use_classifier_loss && lambda[2] > 0) {
        Eigen::RowVectorXd dl = (p_cf.array() - static_cast<double>(desired)) * (lambda[2] * inv_b);
        const auto g = classifier.backward(ccache, dl, {false, true});
        for (std::size_t k = 0; k < B; ++k) grad[k] += g[k];
      }
      for (std::size_t k = 0; k < B; ++k) {
        const auto reg = regularization_losses(delta[k], cfg.eps_l0);
        parts[3] += reg.l0 * inv_b;
        parts[4] += reg.l1 * inv_b;
        grad[k] += (lambda[3] * inv_b) * reg.grad_l0 + (lambda[4] * inv_b) * reg.grad_l1;
        if (variant.residual) grad[k] = grad[k].cwiseProduct(prepared[order[start + k]].indicator);
      }

      LossParts lp{parts};
      if (!cfg.use_triplet) lp.values[0] = 0.0;
      if (!cfg.use_classifier_loss) lp.values[2] = 0.0;
      const double loss_g = composite_loss(lp, cfg.weights);
      if (!std::isfinite(loss_g)) {
        throw Error("train: generator loss diverged at epoch " + std::to_string(epoch));
      }
      nn::zero_grad(gp);
      b.generator.backward(gcache, grad, {true, false});
      if (!b.g_opt.step(gp)) throw Error("train: non-finite generator gradient at epoch " + std::to_string(epoch));

      // Discriminator: reference instances are real, this batch's
      // counterfactuals are fake.
      std::vector<std::size_t> real_idx(B);
      for (auto& r : real_idx) r = reference[pick_real(rng)];
      const auto reals = gather(train, real_idx);
      nn::SequenceClassifier::Cache rcache;
      const auto d_real = b.discriminator.forward(reals, &rcache);
      nn::zero_grad(dp);
      b.discriminator.backward(dcache, Eigen::RowVectorXd(d_fake * inv_b), {true, false});
      b.discriminator.backward(rcache, Eigen::RowVectorXd((d_real.array() - 1.0) * inv_b), {true, false});
      std::vector<double> real_probs(d_real.data(), d_real.data() + d_real.size());
      const double loss_d = adversarial_losses(real_probs, fake_probs).loss_d;
      if (!std::isfinite(loss_d)) throw Error("train: discriminator loss diverged at epoch " + std::to_string(epoch));
      if (!b.d_opt.step(dp)) throw Error("train: non-finite discriminator gradient at epoch " + std::to_string(epoch));

      for (std::size_t k = 0; k < B; ++k) {
        const Label before = train_pred[queried[order[start + k]]];
        flipped += (p_cf(static_cast<Eigen::Index>(k)) >= 0.5 ? 1 : 0) != before;
      }
      const double w = static_cast<double>(B) / static_cast<double>(order.size());
      log.loss_g += w * loss_g;
      log.loss_d += w * loss_d;
      for (std::size_t k = 0; k < 5; ++k) log.parts[k] += w * parts[k];
    }
    log.tcv = 100.0 * static_cast<double>(flipped) / static_cast<double>(order.size());
    b.history.push_back(log);
  }
  return b;
}

// ---- inference -----------------------------------------------------------

std::vector<CfResult> generate_cfs(std::span<const MtsInstance> queries, const ModelBundle& bundle,
                                   const shapelet::ShapeletPool* pool, const nn::SequenceClassifier& classifier,
                                   double noise_scale, std::uint64_t noise_seed) {
  const auto& spec = bundle.generator.spec();
  const bool residual = spec.head != nn::HeadKind::tanh_full;
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<CfResult> results;
  results.reserve(queries.size());
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < queries.size(); start += chunk) {
    const std::size_t end = std::min(queries.size(), start + chunk);
    std::vector<Series> originals, inputs;
    std::vector<PreparedQuery> prepared;
    for (std::size_t i = start; i < end; ++i) {
      const auto& q = queries[i];
      if (q.signals() != spec.signals || q.length() != spec.length) {
        throw Error("explain: query " + q.id + " does not match the model's shape");
      }
      originals.push_back(q.values);
    }
    const auto p_orig = classifier.forward(originals, nullptr);
    for (std::size_t i = start; i < end; ++i) {
      MtsInstance q = queries[i];
      if (noise_scale > 0) {
        for (Eigen::Index c = 0; c < q.values.size(); ++c) q.values.data()[c] += noise_scale * noise(rng);
      }
      const Label pred = p_orig(static_cast<Eigen::Index>(i - start)) >= 0.5 ? 1 : 0;
      prepared.push_back(prepare_query(q, pool, pred, bundle.config));
      inputs.push_back(prepared.back().generator_input);
    }
    const auto out = bundle.generator.forward(inputs, nullptr);
    std::vector<Series> cfs;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto& q = queries[start + k];
      CfResult r;
      r.id = q.id;
      r.query = q.values;
      if (residual) {
        r.residual = out[k].cwiseProduct(prepared[k].indicator);
        r.x_cf = q.values + r.residual;
      } else {
        // Rebuilt from the residual so x_cf == query + residual holds exactly.
        r.residual = out[k] - q.values;
        r.x_cf = q.values + r.residual;
      }
      r.regions = prepared[k].regions;
      r.p_orig = p_orig(static_cast<Eigen::Index>(k));
      cfs.push_back(r.x_cf);
      results.push_back(std::move(r));
    }
    const auto p_cf = classifier.forward(cfs, nullptr);
    for (std::size_t k = 0; k < cfs.size(); ++k) {
      auto& r = results[start + k];
      r.p_cf = p_cf(static_cast<Eigen::Index>(k));
      r.flipped = (r.p_cf >= 0.5) != (r.p_orig >= 0.5);
    }
  }
  return results;
}

CfResult generate_cf(const MtsInstance& query, const ModelBundle& bundle, const shapelet::ShapeletPool* pool,
                     const nn::SequenceClassifier& classifier) {
  return generate_cfs(std::span<const MtsInstance>(&query, 1), bundle, pool, classifier).front();
}

std::vector<MtsInstance> select_queries(const MtsDataset& test, const nn::SequenceClassifier& classifier,
                                        Label queried_label) {
  const auto pred = predict_all(classifier, test);
  std::vector<MtsInstance> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (pred[i] == queried_label) out.push_back(test[i]);
  }
  return out;
}

}  // namespace cfts::cf
