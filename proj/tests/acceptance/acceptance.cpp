// Acceptance run: prints one PASS/FAIL line per criterion A1..A8.
//
// Exit status is 0 when every criterion was evaluated, whatever the verdicts,
// and 1 when a criterion could not be evaluated at all. --strict also turns
// FAIL verdicts into a nonzero exit.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfts/baselines/nun.hpp"
#include "cfts/cf/config.hpp"
#include "cfts/cf/losses.hpp"
#include "cfts/cf/train.hpp"
#include "cfts/harness/pipeline.hpp"
#include "cfts/harness/report.hpp"
#include "cfts/metrics/metrics.hpp"
#include "cfts/nn/gradcheck.hpp"
#include "cfts/nn/losses.hpp"
#include "cfts/nn/networks.hpp"
#include "cfts/shapelet/shapelet.hpp"
#include "oracles/oracles.hpp"

using namespace cfts;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- random instances ----------------------------------------------------

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t s) : eng(s) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  std::vector<double> vec(std::size_t n, bool grid) {
    std::vector<double> v(n);
    for (auto& x : v) x = grid ? integer(0, 3) : real(-3, 3);
    return v;
  }
  Series series(Eigen::Index v, Eigen::Index t, bool grid) {
    Series s(v, t);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = grid ? integer(0, 2) : real(-3, 3);
    return s;
  }
};

std::vector<double> flat(const Series& s) { return {s.data(), s.data() + s.size()}; }

// ---- A1 ------------------------------------------------------------------

Verdict a1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const double tol = 1e-9;
  std::size_t bad_msd = 0, bad_ig = 0, bad_nun = 0, bad_lof = 0;
  for (int i = 0; i < 1000; ++i) {
    const bool grid = i % 2 == 0;
    const auto T = static_cast<std::size_t>(rng.integer(2, 64));
    const auto l = static_cast<std::size_t>(rng.integer(2, static_cast<int>(T)));
    const auto sig = rng.vec(T, grid), s = rng.vec(l, grid);
    const auto got = shapelet::msd(sig, s);
    const auto want = oracle::msd(sig, s);
    bad_msd += std::abs(got.distance - want.first) > tol || static_cast<std::size_t>(got.best_start) != want.second;
  }
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 40));
    const auto d = rng.vec(n, i % 2 == 0);
    std::vector<Label> labels(n);
    std::vector<int> il(n);
    for (std::size_t j = 0; j < n; ++j) il[j] = labels[j] = rng.integer(0, 1);
    const auto got = shapelet::information_gain(d, labels);
    const auto want = oracle::ig(d, il);
    bad_ig += std::abs(got.ig - want.first) > tol || std::abs(got.osp - want.second) > tol;
  }
  for (int i = 0; i < 1000; ++i) {
    const bool grid = i % 3 == 0;
    const auto n = static_cast<std::size_t>(rng.integer(2, 100));
    const auto v = rng.integer(1, 2), t = rng.integer(2, 4);
    MtsDataset train;
    train.meta = {"a1", v, t, {0, 1}};
    std::vector<Label> pred(n);
    for (std::size_t j = 0; j < n; ++j) {
      pred[j] = j < 2 ? static_cast<Label>(j) : rng.integer(0, 1);
      train.instances.push_back({rng.series(v, t, grid), pred[j], std::to_string(j)});
    }
    const Series q = rng.series(v, t, grid);
    const Label qp = rng.integer(0, 1);
    std::vector<oracle::Vec> unlike;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j) {
      if (pred[j] != qp) {
        unlike.push_back(flat(train[j].values));
        idx.push_back(j);
      }
    }
    bad_nun += baselines::find_nun_index(q, qp, train, pred) != idx[oracle::knn(flat(q), unlike, 1).front()];
  }
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(rng.integer(3, 50));
    const auto dim = static_cast<std::size_t>(rng.integer(1, 4));
    const auto k = static_cast<std::size_t>(rng.integer(1, static_cast<int>(std::min<std::size_t>(n - 1, 6))));
    std::vector<oracle::Vec> base;
    for (std::size_t j = 0; j < n; ++j) base.push_back(rng.vec(dim, i % 4 == 0));
    const auto p = i % 5 == 0 ? base[static_cast<std::size_t>(rng.integer(0, static_cast<int>(n) - 1))]
                              : rng.vec(dim, false);
    const double want = oracle::lof(p, base, k);
    bad_lof += std::abs(metrics::lof(p, base, k) - want) > tol * std::max(1.0, std::abs(want));
  }
  const double secs = seconds_since(t0);
  const bool pass = bad_msd + bad_ig + bad_nun + bad_lof == 0 && secs < 60.0;
  return {pass, fmt("oracle mismatches msd %zu, ig %zu, nun %zu, lof %zu of 1000 each; %.1f s (limit 60 s)", bad_msd,
                    bad_ig, bad_nun, bad_lof, secs)};
}

// ---- A2 ------------------------------------------------------------------

std::vector<Series> batch(Rng& rng, std::size_t b, Eigen::Index v, Eigen::Index t) {
  std::vector<Series> out;
  for (std::size_t i = 0; i < b; ++i) out.push_back(rng.series(v, t, false));
  return out;
}

double generator_check(Rng& rng) {
  double worst = 0;
  for (auto kind : {nn::HeadKind::dual_relu, nn::HeadKind::linear_diff, nn::HeadKind::tanh_full}) {
    const nn::NetworkSpec spec{nn::NetworkKind::generator, 2, 5, 3, kind, 2.0};
    for (std::uint64_t seed = 0;; ++seed) {
      nn::Generator g(spec, seed);
      const auto xs = batch(rng, 2, 2, 5);
      nn::Generator::Cache cache;
      g.forward(xs, &cache);
      if (kind == nn::HeadKind::dual_relu && nn::Generator::min_abs_preactivation(cache) < 1e-3) continue;
      const auto w = batch(rng, 2, 2, 5);
      auto loss = [&] {
        const auto out = g.forward(xs, nullptr);
        double s = 0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i].cwiseProduct(w[i]).sum();
        return s;
      };
      const auto r = nn::grad_check(g.parameters(), loss, [&] {
        nn::zero_grad(g.parameters());
        g.backward(cache, w);
      });
      worst = std::max(worst, r.max_rel_error);
      break;
    }
  }
  return worst;
}

double classifier_check(Rng& rng, nn::NetworkKind kind) {
  nn::SequenceClassifier c({kind, 2, 5, 3}, 4);
  const auto xs = batch(rng, 3, 2, 5);
  const std::vector<int> y{0, 1, 1};
  auto loss = [&] {
    const auto p = c.forward(xs, nullptr);
    double s = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) s += nn::bce(p(i), y[static_cast<std::size_t>(i)]);
    return s / 3.0;
  };
  const auto r = nn::grad_check(c.parameters(), loss, [&] {
    nn::zero_grad(c.parameters());
    nn::SequenceClassifier::Cache cache;
    const auto p = c.forward(xs, &cache);
    Eigen::RowVectorXd d(3);
    for (Eigen::Index i = 0; i < 3; ++i) d(i) = (p(i) - y[static_cast<std::size_t>(i)]) / 3.0;
    c.backward(cache, d, {true, false});
  });
  return r.max_rel_error;
}

double triplet_check(Rng& rng) {
  double worst = 0;
  int checked = 0;
  while (checked < 200) {
    Series x = rng.series(2, 4, false);
    const auto pos = batch(rng, 2, 2, 4), neg = batch(rng, 2, 2, 4);
    const double gamma = rng.real(0, 3);
    const auto tl = cf::triplet_loss(x, pos, neg, gamma);
    // Skip the hinge and the |.| kinks, where finite differences are meaningless.
    double kink = tl.d_pos - tl.d_neg + gamma;
    for (const auto& s : pos) kink = std::min(kink, (x - s).cwiseAbs().minCoeff());
    for (const auto& s : neg) kink = std::min(kink, (x - s).cwiseAbs().minCoeff());
    if (kink < 1e-2) continue;
    const nn::Matrix num = nn::numeric_gradient(x, [&] { return cf::triplet_loss(x, pos, neg, gamma).value; });
    for (Eigen::Index i = 0; i < num.size(); ++i) {
      worst = std::max(worst, nn::relative_error(tl.grad.data()[i], num.data()[i]));
    }
    ++checked;
  }
  return worst;
}

Verdict a2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  const double g = generator_check(rng);
  const double d = classifier_check(rng, nn::NetworkKind::discriminator);
  const double c = classifier_check(rng, nn::NetworkKind::classifier);
  const double t = triplet_check(rng);
  const double secs = seconds_since(t0);
  const bool pass = std::max({g, d, c, t}) < 1e-4 && secs < 120.0;
  return {pass, fmt("max relative error generator %.2e, discriminator %.2e, classifier %.2e, triplet %.2e "
                    "(limit 1e-4); %.1f s (limit 120 s)",
                    g, d, c, t, secs)};
}

// ---- shared desk runs ----------------------------------------------------

struct Context {
  fs::path work;
  fs::path cli;
  cf::TrainConfig desk;
  fs::path data;
  harness::PipelineResult main_run;  // trishgan, seeds 0..4, desk config
  double main_secs = 0.0;
  bool main_ok = false;
  std::string main_error;
};

harness::ExperimentPlan desk_plan(const Context& ctx, const std::string& name) {
  harness::ExperimentPlan plan;
  plan.dataset = ctx.data;
  plan.config = ctx.desk;
  plan.seeds = {0, 1, 2, 3, 4};
  plan.methods = {"trishgan"};
  plan.out = ctx.work / name;
  return plan;
}

void prepare_data(Context& ctx) {
  ctx.data = ctx.work / "synth";
  auto [train, test] = synth_dataset(SynthConfig{});
  save_dataset(train, ctx.data, Split::train);
  save_dataset(test, ctx.data, Split::test);
}

void main_run(Context& ctx) {
  const auto t0 = Clock::now();
  try {
    ctx.main_run = harness::run_pipeline(desk_plan(ctx, "a3"));
    ctx.main_ok = true;
  } catch (const std::exception& e) {
    ctx.main_error = e.what();
  }
  ctx.main_secs = seconds_since(t0);
}

// ---- A3 ------------------------------------------------------------------

Verdict a3(const Context& ctx) {
  if (!ctx.main_ok) throw Error("desk run failed: " + ctx.main_error);
  std::string per_seed;
  bool pass = true;
  for (const auto& r : ctx.main_run.runs) {
    per_seed += fmt(" s%llu=%.1f", static_cast<unsigned long long>(r.seed), r.metrics.tcv);
    pass = pass && r.metrics.tcv == 100.0;
  }
  const double per = ctx.main_secs / static_cast<double>(ctx.main_run.runs.size());
  pass = pass && ctx.desk.epochs <= 200 && per < 600.0;
  return {pass, fmt("test TCV%s after %zu epochs; %.0f s per seed (limit 600 s)", per_seed.c_str(), ctx.desk.epochs,
                    per)};
}

// ---- A4 ------------------------------------------------------------------

Verdict a4(const Context& ctx) {
  if (!ctx.main_ok) throw Error("desk run failed: " + ctx.main_error);
  auto plan = desk_plan(ctx, "a4_off");
  plan.config.use_shapelet = false;
  const auto off = harness::run_pipeline(plan);
  const double s_on = ctx.main_run.reports.front().sparsity.mean;
  const double s_off = off.reports.front().sparsity.mean;

  const auto data = harness::load_data(ctx.data, false);
  const auto pool = shapelet::load_pool(ctx.work / "a3" / "pool.json");
  std::size_t checked = 0, inside = 0;
  for (std::uint64_t seed : desk_plan(ctx, "").seeds) {
    const fs::path dir = ctx.work / "a3" / ("seed_" + std::to_string(seed));
    const auto clf = cf::load_classifier(dir / "classifier.json");
    const auto results = harness::attach_queries(harness::read_results(dir / "trishgan" / "results.jsonl"), data.test);
    for (const auto& r : results) {
      const MtsInstance q{r.query, 0, r.id};
      const auto regions = shapelet::extract_discriminative(q, pool, clf.model.predict(r.query));
      const auto mask = shapelet::mask_series(q, regions);
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep =
          Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(r.query.rows(), r.query.cols(), false);
      for (const auto& g : mask.regions) keep.row(g.signal).segment(g.start, g.length).setConstant(true);
      bool ok = true;
      for (Eigen::Index v = 0; v < r.residual.rows(); ++v) {
        for (Eigen::Index t = 0; t < r.residual.cols(); ++t) ok = ok && (keep(v, t) || r.residual(v, t) == 0.0);
      }
      ++checked;
      inside += ok;
    }
  }
  const bool pass = s_on <= s_off && checked > 0 && inside == checked;
  return {pass, fmt("mean sparsity with shapelets %.4f, without %.4f; residual support inside regions for %zu of %zu "
                    "test counterfactuals",
                    s_on, s_off, inside, checked)};
}

// ---- A5 ------------------------------------------------------------------

Verdict a5(const Context& ctx) {
  auto plan = desk_plan(ctx, "a5_with");
  plan.config.use_classifier_loss = false;
  plan.config.weights.lambda[0] = 1.0;
  const auto with = harness::run_pipeline(plan);
  plan.out = ctx.work / "a5_without";
  plan.config.weights.lambda[0] = 0.0;
  const auto without = harness::run_pipeline(plan);
  const auto& a = with.reports.front();
  const auto& b = without.reports.front();
  return {a.boundary_dist.mean > b.boundary_dist.mean,
          fmt("classifier loss off: mean boundary_dist %.4f with triplet weight 1, %.4f with weight 0 "
              "(tcv %.1f vs %.1f, p_report %.4f vs %.4f)",
              a.boundary_dist.mean, b.boundary_dist.mean, a.tcv.mean, b.tcv.mean, a.robustness.mean,
              b.robustness.mean)};
}

// ---- A6 ------------------------------------------------------------------

Verdict a6(const Context& ctx) {
  if (!ctx.main_ok) throw Error("desk run failed: " + ctx.main_error);
  const auto data = harness::load_data(ctx.data, false);
  const fs::path dir = ctx.work / "a3" / "seed_0";
  const auto clf = cf::load_classifier(dir / "classifier.json");
  const auto bundle = cf::load_bundle(dir / "trishgan" / "model");
  const auto pool = shapelet::load_pool(ctx.work / "a3" / "pool.json");
  const auto queries = cf::select_queries(data.test, clf.model, ctx.desk.queried_label);
  const double scales[] = {0.0, 0.2, 0.4, 0.6};
  const auto pts = metrics::noise_stability(queries, bundle, &pool, clf.model, scales, mix_seed(0, 6));
  const double base = pts.front().p_report;
  bool pass = base > 0.0;
  std::string text;
  for (const auto& p : pts) {
    const double ratio = p.p_report / base;
    pass = pass && ratio <= 3.0 && ratio >= 1.0 / 3.0;
    text += fmt(" %.1f:%.4f", p.scale, p.p_report);
  }
  return {pass, fmt("p_report by noise scale%s; every scale within a factor of 3 of scale 0", text.c_str())};
}

// ---- A7 ------------------------------------------------------------------

int run_cli(const Context& ctx, const std::string& args) {
  const std::string cmd = "\"" + ctx.cli.string() + "\" " + args + " > \"" + (ctx.work / "cli.log").string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

Verdict a7(const Context& ctx) {
  const auto m = cf::central_margin(10.0, 4.0);
  const bool example = !m.degenerate && m.gamma_central == 3.0 && m.delta == 1.0 &&
                       m.candidates == std::vector<double>{2, 3, 4, 5};
  if (ctx.cli.empty()) return {false, "no --cli binary given; worked example " + std::string(example ? "ok" : "wrong")};

  const fs::path dir = ctx.work / "a7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  if (run_cli(ctx, "--seed 5 --out \"" + (dir / "data").string() +
                       "\" synth --n-train 40 --n-test 20 --signals 2 --length 12 --bump-start 4 --bump-length 4") != 0) {
    throw Error("cli synth failed: " + slurp(ctx.work / "cli.log"));
  }
  auto cfg = ctx.desk;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.hidden_size = 3;
  cfg.classifier.epochs = 30;
  cfg.classifier.hidden_size = 4;
  cfg.margin.candidates = m.candidates;
  harness::write_text(dir / "config.json", cf::config_to_json(cfg).dump(2) + "\n");
  if (run_cli(ctx, "--config \"" + (dir / "config.json").string() + "\" --seeds 0 --out \"" + (dir / "out").string() +
                       "\" sweep --data \"" + (dir / "data").string() + "\"") != 0) {
    throw Error("cli sweep failed: " + slurp(ctx.work / "cli.log"));
  }
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  std::set<std::string> names, want;
  for (const auto& row : report.at("rows")) names.insert(row.at("method").get<std::string>());
  for (double g : m.candidates) {
    for (std::size_t n : harness::kSweepTripletN) want.insert("gamma=" + format_double(g) + ",n=" + std::to_string(n));
  }
  const std::size_t rows = report.at("rows").size();
  const bool pass = example && rows == m.candidates.size() * harness::kSweepTripletN.size() && names == want;
  return {pass, fmt("central margin (10, 4) -> gamma %g, delta %g, |S| %zu (%s); sweep report rows %zu of %zu "
                    "expected, cell names %s",
                    m.gamma_central, m.delta, m.candidates.size(), example ? "ok" : "wrong", rows,
                    m.candidates.size() * harness::kSweepTripletN.size(), names == want ? "match" : "differ")};
}

// ---- A8 ------------------------------------------------------------------

Verdict a8(const Context& ctx) {
  auto plan = desk_plan(ctx, "a8_first");
  plan.config.epochs = 3;
  plan.seeds = {0, 1};
  plan.methods.assign(harness::kAllMethods.begin(), harness::kAllMethods.end());
  harness::run_pipeline(plan);
  const auto first = slurp(plan.out / "report.json");
  plan.out = ctx.work / "a8_second";
  harness::run_pipeline(plan);
  const auto second = slurp(plan.out / "report.json");
  return {!first.empty() && first == second,
          fmt("two pipeline runs over %zu methods and 2 seeds: report.json %s (%zu bytes)", plan.methods.size(),
              first == second ? "byte-identical" : "differs", first.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  fs::path config;
  bool strict = false;
  std::vector<std::string> only;
  app.add_option("--cli", ctx.cli, "Path to the cfts command-line binary");
  app.add_option("--work", ctx.work, "Scratch directory")->required();
  app.add_option("--config", config, "Desk configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--only", only, "Run only these criteria, e.g. A1,A7")->delimiter(',');
  app.add_flag("--strict", strict, "Exit nonzero when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  try {
    ctx.desk = cf::load_config(config);
    fs::remove_all(ctx.work);
    fs::create_directories(ctx.work);
    prepare_data(ctx);
  } catch (const std::exception& e) {
    std::printf("setup error: %s\n", e.what());
    return 1;
  }

  auto wanted = [&](const std::string& id) { return only.empty() || std::ranges::find(only, id) != only.end(); };
  if (wanted("A3") || wanted("A4") || wanted("A6")) main_run(ctx);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"A1", [] { return a1(); }},
      {"A2", [] { return a2(); }},
      {"A3", [&] { return a3(ctx); }},
      {"A4", [&] { return a4(ctx); }},
      {"A5", [&] { return a5(ctx); }},
      {"A6", [&] { return a6(ctx); }},
      {"A7", [&] { return a7(ctx); }},
      {"A8", [&] { return a8(ctx); }},
  };
  std::size_t passed = 0, failed = 0, errors = 0;
  for (const auto& [id, fn] : criteria) {
    if (!wanted(id)) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    (v.pass ? passed : failed) += 1;
    std::printf("%s %s %s\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu passed, %zu failed\n", passed, failed);
  if (errors > 0) return 1;
  return strict && failed > 0 ? 1 : 0;
}
