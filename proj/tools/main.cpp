// Command-line front end: data generation, mining, training, explanation,
// evaluation and experiment orchestration.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfts/baselines/nun.hpp"
#include "cfts/cf/config.hpp"
#include "cfts/cf/train.hpp"
#include "cfts/core/series.hpp"
#include "cfts/harness/pipeline.hpp"
#include "cfts/harness/report.hpp"
#include "cfts/metrics/metrics.hpp"
#include "cfts/shapelet/shapelet.hpp"

namespace fs = std::filesystem;
using namespace cfts;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  bool znorm = false;
  std::size_t jobs = 1;
};

/// Prefixes the error message with the stage name unless already tagged.
template <typename F>
void stage(const std::string& name, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.find(": ") != std::string::npos && msg.rfind(name + ":", 0) == 0) throw;
    throw Error(name + ": " + msg);
  } catch (const std::exception& e) {
    throw Error(name + ": " + e.what());
  }
}

cf::TrainConfig load_cfg(const Globals& g) {
  cf::TrainConfig cfg;
  try {
    if (!g.config.empty()) cfg = cf::load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    cf::validate(cfg);
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    throw Error(msg.rfind("config:", 0) == 0 ? msg : "config: " + msg);
  }
  return cfg;
}

std::string require_out(const Globals& g, const std::string& cmd) {
  if (g.out.empty()) throw Error(cmd + ": --out is required");
  return g.out;
}

MtsDataset load_split(const std::string& dir, Split split, bool znorm) {
  auto ds = load_dataset(dir, split);
  return znorm ? z_normalize(ds) : ds;
}

harness::ExperimentPlan make_plan(const Globals& g, const cf::TrainConfig& cfg, const std::string& data,
                                  const std::string& cmd) {
  harness::ExperimentPlan plan;
  plan.dataset = data;
  plan.config = cfg;
  if (!g.seeds.empty()) {
    plan.seeds = g.seeds;
  } else if (g.seed) {
    plan.seeds = {*g.seed};
  }
  plan.out = require_out(g, cmd);
  plan.znorm = g.znorm;
  plan.jobs = g.jobs;
  return plan;
}

void print_reports(const std::vector<metrics::MetricsReport>& reports) {
  std::cout << harness::report_csv(reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual explanations for multivariate time-series classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--seeds", g.seeds, "Seeds for repeated runs")->delimiter(',');
  app.add_flag("--znorm", g.znorm, "Z-normalize every instance per signal after loading");
  app.add_option("--jobs", g.jobs, "Parallel jobs for seeds and sweep cells")->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic bump dataset");
  SynthConfig sc;
  synth->add_option("--n-train", sc.n_train);
  synth->add_option("--n-test", sc.n_test);
  synth->add_option("--signals", sc.signals);
  synth->add_option("--length", sc.length);
  synth->add_option("--bump-signal", sc.bump_signal);
  synth->add_option("--bump-start", sc.bump_start, "0-based");
  synth->add_option("--bump-length", sc.bump_length);
  synth->add_option("--amplitude", sc.bump_amplitude);
  synth->add_option("--noise", sc.noise_sigma);

  // mine
  auto* mine = app.add_subcommand("mine", "Discover the shapelet pool");
  std::string data;
  mine->add_option("--data", data, "Dataset directory")->required();

  // train-classifier
  auto* train_clf = app.add_subcommand("train-classifier", "Train the classifier to be explained");
  train_clf->add_option("--data", data)->required();

  // train
  auto* train = app.add_subcommand("train", "Train the counterfactual generator");
  std::string pool_path, classifier_path, model_dir, variant;
  train->add_option("--data", data)->required();
  train->add_option("--pool", pool_path, "Shapelet pool (needed when shapelets are used)");
  train->add_option("--classifier", classifier_path)->required();
  train->add_option("--variant", variant, "Override the config variant");

  // explain
  auto* explain = app.add_subcommand("explain", "Generate counterfactuals for the test queries");
  std::string method = "model", split_name = "test", heatmap_dir;
  std::optional<Eigen::Index> window_len;
  std::optional<std::size_t> max_segments;
  double noise_scale = 0.0;
  explain->add_option("--data", data)->required();
  explain->add_option("--model", model_dir, "Model directory written by train");
  explain->add_option("--pool", pool_path);
  explain->add_option("--classifier", classifier_path)->required();
  explain->add_option("--method", method, "model or nun")->check(CLI::IsMember({"model", "nun"}));
  explain->add_option("--split", split_name)->check(CLI::IsMember({"train", "test"}));
  explain->add_option("--window-len", window_len, "NUN substitution window length");
  explain->add_option("--max-segments", max_segments, "NUN substitution budget");
  explain->add_option("--noise", noise_scale, "Gaussian noise scale on the generator input");
  explain->add_option("--heatmaps", heatmap_dir, "Directory for per-query residual SVGs");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a results file");
  std::string results_path, name = "run";
  eval->add_option("--data", data)->required();
  eval->add_option("--results", results_path)->required();
  eval->add_option("--name", name, "Row name in the report");

  // report
  auto* report = app.add_subcommand("report", "Aggregate metrics files into a report");
  std::vector<std::string> inputs;
  report->add_option("--inputs", inputs, "metrics.json files")->required();

  // run / ablate / sweep
  std::vector<std::string> methods;
  auto* run = app.add_subcommand("run", "Full pipeline over every seed");
  run->add_option("--data", data)->required();
  run->add_option("--methods", methods)->delimiter(',');
  std::size_t heatmaps = 0;
  run->add_option("--heatmaps", heatmaps, "Residual SVGs per seed and method");

  auto* ablate = app.add_subcommand("ablate", "Pipeline with one switch on and off");
  std::string toggle;
  ablate->add_option("--data", data)->required();
  ablate->add_option("--toggle", toggle)
      ->required()
      ->check(CLI::IsMember({"use_shapelet", "use_triplet", "use_classifier_loss", "mask_residuals", "methods"}));

  auto* sweep = app.add_subcommand("sweep", "Margin and triplet-count grid");
  sweep->add_option("--data", data)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load_cfg(g);

    if (synth->parsed()) {
      stage("synth", [&] {
        if (g.seed) sc.seed = *g.seed;
        const auto out = require_out(g, "synth");
        auto [tr, te] = synth_dataset(sc);
        save_dataset(tr, out, Split::train);
        save_dataset(te, out, Split::test);
      });
    } else if (mine->parsed()) {
      stage("mine", [&] {
        const auto out = require_out(g, "mine");
        const auto tr = load_split(data, Split::train, g.znorm);
        const auto pool = shapelet::discover_pool(
            tr, {cfg.discovery.k_pips, cfg.discovery.per_class, cfg.discovery.max_length});
        shapelet::save_pool(pool, out);
      });
    } else if (train_clf->parsed()) {
      stage("train-classifier", [&] {
        const auto out = require_out(g, "train-classifier");
        const auto tr = load_split(data, Split::train, g.znorm);
        const auto c = cf::train_classifier(tr, cfg.classifier, cfg.seed);
        cf::save_classifier(c, out);
        std::cout << "train accuracy " << format_double(c.train_accuracy) << "\n";
      });
    } else if (train->parsed()) {
      stage("train", [&] {
        const auto out = require_out(g, "train");
        auto run_cfg = cfg;
        if (!variant.empty()) run_cfg.variant = cf::variant_from_string(variant);
        const auto tr = load_split(data, Split::train, g.znorm);
        const auto c = cf::load_classifier(classifier_path);
        std::optional<shapelet::ShapeletPool> pool;
        if (!pool_path.empty()) pool = shapelet::load_pool(pool_path);
        const auto b = cf::train(tr, pool ? &*pool : nullptr, c.model, run_cfg);
        cf::save_bundle(b, out);
        harness::write_text(fs::path(out) / "tcv_curve.csv", harness::tcv_curve_csv(b.history));
      });
    } else if (explain->parsed()) {
      stage("explain", [&] {
        const auto out = require_out(g, "explain");
        const auto ds = load_split(data, split_name == "train" ? Split::train : Split::test, g.znorm);
        const auto c = cf::load_classifier(classifier_path);
        const auto queries = cf::select_queries(ds, c.model, cfg.queried_label);
        std::vector<cf::CfResult> results;
        if (method == "nun") {
          const auto tr = load_split(data, Split::train, g.znorm);
          const auto pred = cf::predict_all(c.model, tr);
          const auto w = window_len.value_or(cfg.nun.window_len);
          const auto budget = max_segments.value_or(cfg.nun.max_segments);
          for (const auto& q : queries) {
            const auto idx = baselines::find_nun_index(q.values, c.model.predict(q.values), tr, pred);
            results.push_back(baselines::nun_substitute_cf(q, tr[idx], c.model, w, budget).result);
          }
        } else {
          if (model_dir.empty()) throw Error("--model is required with --method model");
          const auto b = cf::load_bundle(model_dir);
          std::optional<shapelet::ShapeletPool> pool;
          if (!pool_path.empty()) pool = shapelet::load_pool(pool_path);
          if (b.config.use_shapelet && !pool) throw Error("--pool is required for a shapelet model");
          results = cf::generate_cfs(queries, b, pool ? &*pool : nullptr, c.model, noise_scale,
                                     mix_seed(cfg.seed, 0x6e6f697365));
        }
        harness::write_results(results, out);
        if (!heatmap_dir.empty()) {
          for (const auto& r : results) harness::render_heatmap(r, fs::path(heatmap_dir) / (r.id + ".svg"));
        }
        std::cout << results.size() << " counterfactuals, tcv " << format_double(metrics::tcv(results)) << "\n";
      });
    } else if (eval->parsed()) {
      stage("eval", [&] {
        const auto out = require_out(g, "eval");
        const auto te = load_split(data, Split::test, g.znorm);
        const auto stored = harness::read_results(results_path);
        const auto results = harness::attach_queries(stored, te);
        const auto m = metrics::evaluate(results, te, cfg.desired_label(), cfg);
        const nlohmann::json j{{"name", name}, {"seed", cfg.seed}, {"metrics", harness::run_metrics_json(m)}};
        harness::write_text(fs::path(out) / "metrics.json", j.dump(2) + "\n");
        const metrics::RunMetrics runs[] = {m};
        const std::vector<metrics::MetricsReport> reps{metrics::aggregate(runs, name)};
        harness::render_report(reps, out);
        print_reports(reps);
      });
    } else if (report->parsed()) {
      stage("report", [&] {
        const auto out = require_out(g, "report");
        std::vector<std::string> order;
        std::map<std::string, std::vector<metrics::RunMetrics>> groups;
        for (const auto& path : inputs) {
          std::ifstream in(path);
          if (!in) throw Error("missing file: " + path);
          try {
            const auto j = nlohmann::json::parse(in);
            const auto n = j.at("name").get<std::string>();
            if (!groups.count(n)) order.push_back(n);
            groups[n].push_back(harness::run_metrics_from_json(j.at("metrics")));
          } catch (const nlohmann::json::exception& e) {
            throw Error("malformed metrics file " + path + ": " + e.what());
          }
        }
        std::vector<metrics::MetricsReport> reps;
        for (const auto& n : order) reps.push_back(metrics::aggregate(groups[n], n));
        harness::render_report(reps, out);
        print_reports(reps);
      });
    } else if (run->parsed()) {
      stage("run", [&] {
        auto plan = make_plan(g, cfg, data, "run");
        if (!methods.empty()) plan.methods = methods;
        plan.heatmaps = heatmaps;
        print_reports(harness::run_pipeline(plan).reports);
      });
    } else if (ablate->parsed()) {
      stage("ablate", [&] { print_reports(harness::ablate(make_plan(g, cfg, data, "ablate"), toggle).reports); });
    } else if (sweep->parsed()) {
      stage("sweep", [&] { print_reports(harness::sweep(make_plan(g, cfg, data, "sweep")).reports); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
