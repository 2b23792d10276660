#include "cfts/core/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace cfts {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t MtsDataset::count(Label label) const {
  std::size_t c = 0;
  for (const auto& inst : instances) c += inst.label == label ? 1 : 0;
  return c;
}

void validate(const MtsInstance& inst) {
  if (inst.signals() < 1) throw Error("instance " + inst.id + ": needs at least one signal");
  if (inst.length() < 2) throw Error("instance " + inst.id + ": needs at least two time steps");
  if (inst.label != 0 && inst.label != 1) {
    throw Error("instance " + inst.id + ": label " + std::to_string(inst.label) + " outside {0,1}");
  }
  if (!inst.values.allFinite()) throw Error("instance " + inst.id + ": non-finite value");
}

void validate(const MtsDataset& ds) {
  for (const auto& inst : ds.instances) {
    validate(inst);
    if (inst.signals() != ds.meta.signals || inst.length() != ds.meta.length) {
      throw Error("instance " + inst.id + ": shape does not match dataset meta");
    }
  }
}

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, end);
}

namespace {

DatasetMeta read_meta(const fs::path& dir) {
  const fs::path path = dir / "meta.json";
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("malformed " + path.string() + ": " + e.what());
  }
  DatasetMeta meta;
  try {
    meta.name = j.value("name", std::string{});
    meta.signals = j.at("n_signals").get<Eigen::Index>();
    meta.length = j.at("length").get<Eigen::Index>();
    meta.classes = j.value("classes", std::vector<Label>{0, 1});
  } catch (const json::exception& e) {
    throw Error("malformed " + path.string() + ": " + e.what());
  }
  if (meta.signals < 1 || meta.length < 2) throw Error(path.string() + ": degenerate dimensions");
  return meta;
}

void write_meta(const DatasetMeta& meta, const fs::path& dir) {
  json j;
  j["name"] = meta.name;
  j["n_signals"] = meta.signals;
  j["length"] = meta.length;
  j["classes"] = meta.classes;
  std::ofstream out(dir / "meta.json");
  if (!out) throw Error("cannot write " + (dir / "meta.json").string());
  out << j.dump(2) << '\n';
}

double parse_field(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error("line " + std::to_string(line_no) + ": unparseable value '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) throw Error("line " + std::to_string(line_no) + ": non-finite value");
  return v;
}

}  // namespace

MtsDataset load_dataset(const fs::path& dir, Split split) {
  MtsDataset ds;
  ds.meta = read_meta(dir);
  const fs::path path = dir / (to_string(split) + ".csv");
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());

  const auto V = ds.meta.signals;
  const auto T = ds.meta.length;
  const std::size_t expected = 1 + static_cast<std::size_t>(V * T);
  std::vector<std::string_view> fields;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    while (true) {
      auto pos = rest.find(',');
      fields.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (fields.size() != expected) {
      throw Error(path.string() + " line " + std::to_string(line_no) + ": expected " +
                  std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
    }
    MtsInstance inst;
    const double label = parse_field(fields[0], line_no);
    if (label != 0.0 && label != 1.0) {
      throw Error(path.string() + " line " + std::to_string(line_no) + ": label outside {0,1}");
    }
    inst.label = static_cast<Label>(label);
    inst.values.resize(V, T);
    std::size_t f = 1;
    for (Eigen::Index v = 0; v < V; ++v) {
      for (Eigen::Index t = 0; t < T; ++t) inst.values(v, t) = parse_field(fields[f++], line_no);
    }
    inst.id = to_string(split) + ":" + std::to_string(ds.instances.size());
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

void save_dataset(const MtsDataset& ds, const fs::path& dir, Split split) {
  validate(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_meta(ds.meta, dir);
  const fs::path path = dir / (to_string(split) + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& inst : ds.instances) {
    out << inst.label;
    for (Eigen::Index v = 0; v < inst.signals(); ++v) {
      for (Eigen::Index t = 0; t < inst.length(); ++t) out << ',' << format_double(inst.values(v, t));
    }
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

void validate(const SynthConfig& cfg) {
  if (cfg.signals < 1 || cfg.length < 2) throw Error("synth: degenerate dimensions");
  if (cfg.n_train < 2 || cfg.n_test < 2) throw Error("synth: each split needs at least two instances");
  if (cfg.bump_signal < 0 || cfg.bump_signal >= cfg.signals) throw Error("synth: bump_signal out of range");
  if (cfg.bump_start < 0 || cfg.bump_length < 1 || cfg.bump_start + cfg.bump_length > cfg.length) {
    throw Error("synth: bump span outside the series");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw Error("synth: noise_sigma must be >= 0");
}

std::pair<MtsDataset, MtsDataset> synth_dataset(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto make = [&](std::size_t n, Split split) {
    MtsDataset ds;
    ds.meta = DatasetMeta{cfg.name, cfg.signals, cfg.length, {0, 1}};
    ds.instances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      MtsInstance inst;
      inst.label = static_cast<Label>(i % 2);
      inst.id = to_string(split) + ":" + std::to_string(i);
      inst.values.resize(cfg.signals, cfg.length);
      for (Eigen::Index v = 0; v < cfg.signals; ++v) {
        for (Eigen::Index t = 0; t < cfg.length; ++t) inst.values(v, t) = cfg.noise_sigma * noise(rng);
      }
      if (inst.label == 1) {
        inst.values.row(cfg.bump_signal).segment(cfg.bump_start, cfg.bump_length).array() +=
            cfg.bump_amplitude;
      }
      ds.instances.push_back(std::move(inst));
    }
    return ds;
  };
  MtsDataset train = make(cfg.n_train, Split::train);
  MtsDataset test = make(cfg.n_test, Split::test);
  return {std::move(train), std::move(test)};
}

std::pair<MtsDataset, MtsDataset> split_by_label(const MtsDataset& ds, Label queried_label) {
  MtsDataset queried, reference;
  queried.meta = reference.meta = ds.meta;
  for (const auto& inst : ds.instances) {
    (inst.label == queried_label ? queried : reference).instances.push_back(inst);
  }
  if (queried.empty() || reference.empty()) {
    throw Error("split_by_label: both classes must be present");
  }
  return {std::move(queried), std::move(reference)};
}

MtsDataset z_normalize(const MtsDataset& ds) {
  MtsDataset out = ds;
  for (auto& inst : out.instances) {
    for (Eigen::Index v = 0; v < inst.signals(); ++v) {
      auto row = inst.values.row(v);
      const double mean = row.mean();
      const double var = (row.array() - mean).square().mean();
      if (var <= 0.0) {
        row.setZero();
      } else {
        row = (row.array() - mean) / std::sqrt(var);
      }
    }
  }
  return out;
}

double squared_l2(const Series& a, const Series& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("squared_l2: shape mismatch");
  return (a - b).squaredNorm();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cfts
