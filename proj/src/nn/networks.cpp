#include "cfts/nn/networks.hpp"

#include <algorithm>
#include <limits>

namespace cfts::nn {

std::string to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::generator: return "generator";
    case NetworkKind::discriminator: return "discriminator";
    case NetworkKind::classifier: return "classifier";
  }
  return "generator";
}

NetworkKind network_kind_from_string(const std::string& s) {
  if (s == "generator") return NetworkKind::generator;
  if (s == "discriminator") return NetworkKind::discriminator;
  if (s == "classifier") return NetworkKind::classifier;
  throw Error("unknown network kind: " + s);
}

Sequence to_time_major(std::span<const Series> batch) {
  if (batch.empty()) throw Error("empty batch");
  const Index V = batch.front().rows();
  const Index T = batch.front().cols();
  const auto B = static_cast<Index>(batch.size());
  Sequence seq(static_cast<std::size_t>(T), Matrix(V, B));
  for (Index j = 0; j < B; ++j) {
    const auto& s = batch[static_cast<std::size_t>(j)];
    if (s.rows() != V || s.cols() != T) throw Error("batch members differ in shape");
    for (Index t = 0; t < T; ++t) seq[static_cast<std::size_t>(t)].col(j) = s.col(t);
  }
  return seq;
}

std::vector<Series> from_time_major(const Sequence& seq) {
  const auto T = static_cast<Index>(seq.size());
  const Index V = seq.front().rows();
  const Index B = seq.front().cols();
  std::vector<Series> out(static_cast<std::size_t>(B), Series(V, T));
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < B; ++j) out[static_cast<std::size_t>(j)].col(t) = seq[static_cast<std::size_t>(t)].col(j);
  }
  return out;
}

namespace {

void check_shape(const NetworkSpec& spec, std::span<const Series> inputs) {
  for (const auto& x : inputs) {
    if (x.rows() != spec.signals || x.cols() != spec.length) {
      throw Error(to_string(spec.kind) + ": input shape " + std::to_string(x.rows()) + "x" +
                  std::to_string(x.cols()) + " does not match " + std::to_string(spec.signals) + "x" +
                  std::to_string(spec.length));
    }
  }
}

}  // namespace

// ---- Generator -----------------------------------------------------------

Generator::Generator(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.signals < 1 || spec.length < 1 || spec.hidden < 1) throw Error("generator: degenerate spec");
  std::mt19937_64 rng(seed);
  encoder = BiLstm(spec.signals, spec.hidden, "generator.encoder", rng);
  head = ResidualHead(2 * spec.hidden, spec.signals, spec.head, spec.output_scale, "generator.head", rng);
}

std::vector<Series> Generator::forward(std::span<const Series> inputs, Cache* cache) const {
  check_shape(spec_, inputs);
  Sequence x = to_time_major(inputs);
  BiLstm::Cache enc;
  Sequence hidden = encoder.forward(x, cache ? &enc : nullptr);
  Sequence out(hidden.size());
  std::vector<ResidualHead::Cache> head_cache(cache ? hidden.size() : 0);
  for (std::size_t t = 0; t < hidden.size(); ++t) out[t] = head.forward(hidden[t], cache ? &head_cache[t] : nullptr);
  if (cache) {
    cache->input = std::move(x);
    cache->encoder = std::move(enc);
    cache->hidden = std::move(hidden);
    cache->head = std::move(head_cache);
  }
  return from_time_major(out);
}

Series Generator::forward(const Series& input) const {
  return forward(std::span<const Series>(&input, 1), nullptr).front();
}

void Generator::backward(const Cache& cache, std::span<const Series> d_out, BackwardOptions opt) {
  Sequence dy = to_time_major(d_out);
  if (dy.size() != cache.hidden.size()) throw Error("generator: gradient length mismatch");
  BackwardOptions head_opt{opt.param_grads, true};
  Sequence dh(dy.size());
  for (std::size_t t = 0; t < dy.size(); ++t) dh[t] = head.backward(cache.hidden[t], cache.head[t], dy[t], head_opt);
  encoder.backward(cache.input, cache.encoder, dh, {opt.param_grads, false});
}

void Generator::zero_head() {
  for (auto* p : head.parameters()) p->value.setZero();
}

ParamRefs Generator::parameters() {
  ParamRefs out = encoder.parameters();
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

double Generator::min_abs_preactivation(const Cache& cache) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& hc : cache.head) m = std::min(m, ResidualHead::min_abs_preactivation(hc));
  return m;
}

// ---- SequenceClassifier --------------------------------------------------

SequenceClassifier::SequenceClassifier(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.signals < 1 || spec.length < 1 || spec.hidden < 1) throw Error("classifier: degenerate spec");
  std::mt19937_64 rng(seed);
  encoder = BiLstm(spec.signals, spec.hidden, to_string(spec.kind) + ".encoder", rng);
  out = Dense(2 * spec.hidden, 1, to_string(spec.kind) + ".out", rng);
}

Eigen::RowVectorXd SequenceClassifier::forward(std::span<const Series> inputs, Cache* cache) const {
  check_shape(spec_, inputs);
  Sequence x = to_time_major(inputs);
  BiLstm::Cache enc;
  Sequence hidden = encoder.forward(x, cache ? &enc : nullptr);
  Matrix pooled = Matrix::Zero(encoder.output_size(), static_cast<Index>(inputs.size()));
  for (const auto& h : hidden) pooled += h;
  pooled /= static_cast<double>(hidden.size());
  Eigen::RowVectorXd logits = out.forward(pooled).row(0);
  Eigen::RowVectorXd probs = logits.unaryExpr([](double z) { return sigmoid(z); });
  if (cache) {
    cache->input = std::move(x);
    cache->encoder = std::move(enc);
    cache->hidden = std::move(hidden);
    cache->pooled = std::move(pooled);
    cache->logits = std::move(logits);
  }
  return probs;
}

double SequenceClassifier::predict_proba(const Series& x) const {
  return forward(std::span<const Series>(&x, 1), nullptr)(0);
}

std::vector<Series> SequenceClassifier::backward(const Cache& cache, const Eigen::RowVectorXd& d_logits,
                                                 BackwardOptions opt) {
  if (d_logits.size() != cache.pooled.cols()) throw Error("classifier: gradient batch mismatch");
  const Matrix dy = d_logits;
  Matrix dpooled = out.backward(cache.pooled, dy, {opt.param_grads, true});
  dpooled /= static_cast<double>(cache.hidden.size());
  Sequence dh(cache.hidden.size(), dpooled);
  Sequence dx = encoder.backward(cache.input, cache.encoder, dh, opt);
  if (!opt.input_grad) return {};
  return from_time_major(dx);
}

ParamRefs SequenceClassifier::parameters() {
  ParamRefs refs = encoder.parameters();
  for (auto* p : out.parameters()) refs.push_back(p);
  return refs;
}

// ---- serialization -------------------------------------------------------

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"signals", spec.signals},
          {"length", spec.length},
          {"hidden", spec.hidden},
          {"head", to_string(spec.head)},
          {"output_scale", spec.output_scale}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.kind = network_kind_from_string(j.at("kind").get<std::string>());
  s.signals = j.at("signals").get<Index>();
  s.length = j.at("length").get<Index>();
  s.hidden = j.at("hidden").get<Index>();
  s.head = head_kind_from_string(j.value("head", std::string("dual_relu")));
  s.output_scale = j.value("output_scale", 1.0);
  return s;
}

nlohmann::json params_to_json(std::span<ParamTensor* const> params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto* p : params) {
    std::vector<double> values(p->value.data(), p->value.data() + p->value.size());
    arr.push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}, {"values", values}});
  }
  return arr;
}

void params_from_json(const nlohmann::json& j, std::span<ParamTensor* const> params) {
  if (!j.is_array() || j.size() != params.size()) throw Error("parameter list does not match the network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    const auto& e = j[i];
    if (e.at("name").get<std::string>() != p->name) throw Error("parameter name mismatch: " + p->name);
    const auto shape = e.at("shape").get<std::vector<Index>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols()) {
      throw Error("parameter shape mismatch: " + p->name);
    }
    const auto values = e.at("values").get<std::vector<double>>();
    if (static_cast<Index>(values.size()) != p->value.size()) throw Error("parameter size mismatch: " + p->name);
    std::copy(values.begin(), values.end(), p->value.data());
    p->grad.setZero();
  }
}

}  // namespace cfts::nn
