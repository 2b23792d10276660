#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cfts/core/series.hpp"
#include "gen.hpp"

using namespace cfts;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cfts_core_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool same(const MtsDataset& a, const MtsDataset& b) {
  if (a.size() != b.size() || a.meta.signals != b.meta.signals || a.meta.length != b.meta.length) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].label != b[i].label || a[i].values != b[i].values) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("load_dataset reads signal-major rows") {
  auto dir = scratch("layout");
  write(dir / "meta.json", R"({"name":"t","n_signals":2,"length":3,"classes":[0,1]})");
  write(dir / "train.csv", "1,0,0,0,1,1,1\n");
  auto ds = load_dataset(dir, Split::train);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].label == 1);
  CHECK(ds[0].values.row(0).sum() == 0.0);
  CHECK(ds[0].values.row(1).sum() == 3.0);
  CHECK(ds[0].values(1, 2) == 1.0);
}

TEST_CASE("load_dataset rejects malformed input") {
  auto dir = scratch("bad");
  write(dir / "meta.json", R"({"name":"t","n_signals":2,"length":3,"classes":[0,1]})");
  write(dir / "train.csv", "1,0,0,0,1,1\n");
  CHECK_THROWS_AS(load_dataset(dir, Split::train), Error);
  write(dir / "train.csv", "2,0,0,0,1,1,1\n");
  CHECK_THROWS_AS(load_dataset(dir, Split::train), Error);
  write(dir / "train.csv", "1,0,0,nan,1,1,1\n");
  CHECK_THROWS_AS(load_dataset(dir, Split::train), Error);
  write(dir / "train.csv", "1,0,0,x,1,1,1\n");
  CHECK_THROWS_AS(load_dataset(dir, Split::train), Error);
  CHECK_THROWS_AS(load_dataset(dir, Split::test), Error);
  CHECK_THROWS_AS(load_dataset(scratch("missing"), Split::train), Error);
}

TEST_CASE("save_dataset writes one row per instance") {
  MtsDataset ds;
  ds.meta = {"tiny", 1, 2, {0, 1}};
  Series s(1, 2);
  s << 0.5, -1.25;
  ds.instances.push_back({s, 1, "a"});
  auto dir = scratch("tiny");
  save_dataset(ds, dir, Split::test);
  std::ifstream in(dir / "test.csv");
  std::string line, extra;
  std::getline(in, line);
  CHECK(line == "1,0.5,-1.25");
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("codec round trip is exact on random data") {
  gen::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto ds = rng.dataset(static_cast<std::size_t>(rng.integer(2, 12)), rng.integer(1, 4), rng.integer(2, 9));
    for (auto& inst : ds.instances) inst.values *= std::pow(10.0, rng.integer(-8, 8));
    auto dir = scratch("rt");
    save_dataset(ds, dir, Split::train);
    CHECK(same(load_dataset(dir, Split::train), ds));
  }
}

TEST_CASE("synth_dataset zero noise gives exact bump") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.n_train = 4;
  cfg.n_test = 2;
  auto [train, test] = synth_dataset(cfg);
  const Series diff = train[1].values - train[0].values;
  for (Eigen::Index v = 0; v < cfg.signals; ++v) {
    for (Eigen::Index t = 0; t < cfg.length; ++t) {
      const bool in_bump = v == cfg.bump_signal && t >= cfg.bump_start && t < cfg.bump_start + cfg.bump_length;
      CHECK(diff(v, t) == (in_bump ? 5.0 : 0.0));
    }
  }
}

TEST_CASE("synth_dataset is deterministic and balanced") {
  SynthConfig cfg;
  auto a = synth_dataset(cfg);
  auto b = synth_dataset(cfg);
  CHECK(same(a.first, b.first));
  CHECK(same(a.second, b.second));
  CHECK(a.first.count(0) == a.first.count(1));
  cfg.seed = 8;
  CHECK_FALSE(same(synth_dataset(cfg).first, a.first));
}

TEST_CASE("synth_dataset bump mean separates classes") {
  SynthConfig cfg;
  auto [train, test] = synth_dataset(cfg);
  // Threshold halfway between the class means of the bump statistic.
  int correct = 0;
  for (const auto& inst : train.instances) {
    const double m = inst.values.row(cfg.bump_signal).segment(cfg.bump_start, cfg.bump_length).mean();
    correct += (m > cfg.bump_amplitude / 2) == (inst.label == 1);
  }
  CHECK(correct == static_cast<int>(train.size()));
}

TEST_CASE("synth_dataset rejects degenerate dims") {
  SynthConfig cfg;
  cfg.length = 1;
  CHECK_THROWS_AS(synth_dataset(cfg), Error);
  cfg = {};
  cfg.bump_start = 45;
  CHECK_THROWS_AS(synth_dataset(cfg), Error);
  cfg = {};
  cfg.noise_sigma = -1;
  CHECK_THROWS_AS(synth_dataset(cfg), Error);
}

TEST_CASE("split_by_label example") {
  MtsDataset ds;
  ds.meta = {"s", 1, 2, {0, 1}};
  for (int l : {1, 0, 1, 0}) ds.instances.push_back({Series::Constant(1, 2, ds.size()), l, std::to_string(ds.size())});
  auto [q, r] = split_by_label(ds, 1);
  REQUIRE(q.size() == 2);
  REQUIRE(r.size() == 2);
  CHECK(q[0].id == "0");
  CHECK(q[1].id == "2");
  CHECK(r[0].id == "1");
  CHECK(r[1].id == "3");

  for (auto& inst : ds.instances) inst.label = 1;
  CHECK_THROWS_AS(split_by_label(ds, 1), Error);
}

TEST_CASE("split_by_label is an exact partition") {
  gen::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto ds = rng.dataset(static_cast<std::size_t>(rng.integer(2, 30)), 1, 3);
    const Label q = rng.integer(0, 1);
    auto [a, b] = split_by_label(ds, q);
    CHECK(a.size() + b.size() == ds.size());
    std::set<std::string> ids;
    for (const auto& i : a.instances) {
      CHECK(i.label == q);
      ids.insert(i.id);
    }
    for (const auto& i : b.instances) {
      CHECK(i.label != q);
      ids.insert(i.id);
    }
    CHECK(ids.size() == ds.size());
  }
}

TEST_CASE("z_normalize") {
  MtsDataset ds;
  ds.meta = {"z", 2, 4, {0, 1}};
  Series s(2, 4);
  s << 1, 2, 3, 4, 7, 7, 7, 7;
  ds.instances.push_back({s, 0, "a"});
  ds.instances.push_back({s, 1, "b"});
  auto z = z_normalize(ds);
  CHECK(z[0].values.row(0).mean() == doctest::Approx(0.0));
  CHECK(z[0].values.row(1).isZero());
}
