#include "cfts/cf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace cfts::cf {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gan: return "gan";
    case Variant::countergan: return "countergan";
    case Variant::sparse: return "sparse";
    case Variant::trishgan: return "trishgan";
  }
  return "trishgan";
}

Variant variant_from_string(const std::string& s) {
  if (s == "gan") return Variant::gan;
  if (s == "countergan") return Variant::countergan;
  if (s == "sparse") return Variant::sparse;
  if (s == "trishgan") return Variant::trishgan;
  throw Error("config: unknown variant '" + s + "'");
}

namespace {

using json = nlohmann::json;

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.contains(k)) throw Error("config: unknown key '" + where + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where = "") {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  const std::string name = where + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw Error("config: '" + name + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw Error("config: '" + name + "' must be an integer");
    if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw Error("config: '" + name + "' must be >= 0");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw Error("config: '" + name + "' must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw Error("config: '" + name + "' must be a string");
  }
  out = v.get<T>();
}

std::vector<double> read_numbers(const json& v, const std::string& name) {
  if (!v.is_array()) throw Error("config: '" + name + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw Error("config: '" + name + "' must contain numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

TrainConfig config_from_json(const json& j) {
  only_keys(j,
            {"seed", "epochs", "batch_size", "lr", "hidden_size", "lambdas", "margin", "triplet_n", "use_shapelet",
             "use_triplet", "use_classifier_loss", "mask_residuals", "variant", "eps_l0", "sparsity_tau", "lof",
             "queried_label", "triplet_orientation", "discovery", "classifier", "nun", "noise_scales"},
            "");
  TrainConfig c;
  read(j, "seed", c.seed);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "hidden_size", c.hidden_size);
  if (j.contains("lambdas")) {
    const auto l = read_numbers(j.at("lambdas"), "lambdas");
    if (l.size() != 5) throw Error("config: 'lambdas' must have exactly 5 entries");
    std::copy(l.begin(), l.end(), c.weights.lambda.begin());
  }
  if (j.contains("margin")) {
    const auto& m = j.at("margin");
    only_keys(m, {"mode", "gamma", "candidates"}, "margin.");
    std::string mode = "auto";
    read(m, "mode", mode, "margin.");
    if (mode == "fixed") {
      c.margin.mode = MarginMode::fixed;
    } else if (mode == "auto") {
      c.margin.mode = MarginMode::auto_central;
    } else {
      throw Error("config: 'margin.mode' must be \"fixed\" or \"auto\"");
    }
    read(m, "gamma", c.margin.gamma, "margin.");
    if (m.contains("candidates")) c.margin.candidates = read_numbers(m.at("candidates"), "margin.candidates");
  }
  read(j, "triplet_n", c.triplet_n);
  read(j, "use_shapelet", c.use_shapelet);
  read(j, "use_triplet", c.use_triplet);
  read(j, "use_classifier_loss", c.use_classifier_loss);
  read(j, "mask_residuals", c.mask_residuals);
  if (j.contains("variant")) {
    std::string v;
    read(j, "variant", v);
    c.variant = variant_from_string(v);
  }
  read(j, "eps_l0", c.eps_l0);
  read(j, "sparsity_tau", c.sparsity_tau);
  if (j.contains("lof")) {
    const auto& l = j.at("lof");
    only_keys(l, {"k", "theta"}, "lof.");
    read(l, "k", c.lof.k, "lof.");
    read(l, "theta", c.lof.theta, "lof.");
  }
  read(j, "queried_label", c.queried_label);
  if (j.contains("triplet_orientation")) {
    std::string o;
    read(j, "triplet_orientation", o);
    if (o == "toward_desired") {
      c.triplet_orientation = TripletOrientation::toward_desired;
    } else if (o == "toward_factual") {
      c.triplet_orientation = TripletOrientation::toward_factual;
    } else {
      throw Error("config: 'triplet_orientation' must be \"toward_desired\" or \"toward_factual\"");
    }
  }
  if (j.contains("discovery")) {
    const auto& d = j.at("discovery");
    only_keys(d, {"k_pips", "per_class", "max_length"}, "discovery.");
    read(d, "k_pips", c.discovery.k_pips, "discovery.");
    read(d, "per_class", c.discovery.per_class, "discovery.");
    read(d, "max_length", c.discovery.max_length, "discovery.");
  }
  if (j.contains("classifier")) {
    const auto& d = j.at("classifier");
    only_keys(d, {"epochs", "batch_size", "lr", "hidden_size"}, "classifier.");
    read(d, "epochs", c.classifier.epochs, "classifier.");
    read(d, "batch_size", c.classifier.batch_size, "classifier.");
    read(d, "lr", c.classifier.lr, "classifier.");
    read(d, "hidden_size", c.classifier.hidden_size, "classifier.");
  }
  if (j.contains("nun")) {
    const auto& d = j.at("nun");
    only_keys(d, {"window_len", "max_segments"}, "nun.");
    read(d, "window_len", c.nun.window_len, "nun.");
    read(d, "max_segments", c.nun.max_segments, "nun.");
  }
  if (j.contains("noise_scales")) c.noise_scales = read_numbers(j.at("noise_scales"), "noise_scales");
  validate(c);
  return c;
}

void validate(const TrainConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw Error("config: " + msg);
  };
  need(c.epochs >= 1, "'epochs' must be >= 1");
  need(c.batch_size >= 1, "'batch_size' must be >= 1");
  need(std::isfinite(c.lr) && c.lr > 0, "'lr' must be positive");
  need(c.hidden_size >= 1, "'hidden_size' must be >= 1");
  for (double l : c.weights.lambda) need(std::isfinite(l) && l >= 0, "'lambdas' must be nonnegative");
  need(std::isfinite(c.margin.gamma) && c.margin.gamma >= 0, "'margin.gamma' must be >= 0");
  for (double g : c.margin.candidates) need(std::isfinite(g) && g >= 0, "'margin.candidates' must be >= 0");
  need(c.triplet_n >= 1, "'triplet_n' must be >= 1");
  need(c.triplet_n <= c.batch_size, "'triplet_n' must not exceed 'batch_size'");
  need(std::isfinite(c.eps_l0) && c.eps_l0 > 0, "'eps_l0' must be positive");
  need(std::isfinite(c.sparsity_tau) && c.sparsity_tau >= 0, "'sparsity_tau' must be >= 0");
  need(c.lof.k >= 1, "'lof.k' must be >= 1");
  need(std::isfinite(c.lof.theta), "'lof.theta' must be finite");
  need(c.queried_label == 0 || c.queried_label == 1, "'queried_label' must be 0 or 1");
  need(c.discovery.k_pips >= 3, "'discovery.k_pips' must be >= 3");
  need(c.discovery.per_class >= 1, "'discovery.per_class' must be >= 1");
  need(c.discovery.max_length >= 0, "'discovery.max_length' must be >= 0");
  need(c.classifier.epochs >= 1, "'classifier.epochs' must be >= 1");
  need(c.classifier.batch_size >= 1, "'classifier.batch_size' must be >= 1");
  need(std::isfinite(c.classifier.lr) && c.classifier.lr > 0, "'classifier.lr' must be positive");
  need(c.classifier.hidden_size >= 1, "'classifier.hidden_size' must be >= 1");
  need(c.nun.window_len >= 1, "'nun.window_len' must be >= 1");
  for (double s : c.noise_scales) need(std::isfinite(s) && s >= 0, "'noise_scales' must be >= 0");
}

nlohmann::json config_to_json(const TrainConfig& c) {
  json margin = {{"mode", c.margin.mode == MarginMode::fixed ? "fixed" : "auto"}, {"gamma", c.margin.gamma}};
  if (!c.margin.candidates.empty()) margin["candidates"] = c.margin.candidates;
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"hidden_size", c.hidden_size},
          {"lambdas", c.weights.lambda},
          {"margin", margin},
          {"triplet_n", c.triplet_n},
          {"use_shapelet", c.use_shapelet},
          {"use_triplet", c.use_triplet},
          {"use_classifier_loss", c.use_classifier_loss},
          {"mask_residuals", c.mask_residuals},
          {"variant", to_string(c.variant)},
          {"eps_l0", c.eps_l0},
          {"sparsity_tau", c.sparsity_tau},
          {"lof", {{"k", c.lof.k}, {"theta", c.lof.theta}}},
          {"queried_label", c.queried_label},
          {"triplet_orientation",
           c.triplet_orientation == TripletOrientation::toward_desired ? "toward_desired" : "toward_factual"},
          {"discovery",
           {{"k_pips", c.discovery.k_pips},
            {"per_class", c.discovery.per_class},
            {"max_length", c.discovery.max_length}}},
          {"classifier",
           {{"epochs", c.classifier.epochs},
            {"batch_size", c.classifier.batch_size},
            {"lr", c.classifier.lr},
            {"hidden_size", c.classifier.hidden_size}}},
          {"nun", {{"window_len", c.nun.window_len}, {"max_segments", c.nun.max_segments}}},
          {"noise_scales", c.noise_scales}};
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cfts::cf
