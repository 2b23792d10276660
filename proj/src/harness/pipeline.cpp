#include "cfts/harness/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "cfts/baselines/nun.hpp"
#include "cfts/baselines/variant.hpp"
#include "cfts/cf/train.hpp"
#include "cfts/harness/report.hpp"
#include "cfts/shapelet/shapelet.hpp"

namespace cfts::harness {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_method(const std::string& name) {
  return std::find(kAllMethods.begin(), kAllMethods.end(), name) != kAllMethods.end();
}

void validate(const ExperimentPlan& plan) {
  if (plan.seeds.empty()) throw Error("plan: at least one seed is required");
  if (plan.methods.empty()) throw Error("plan: at least one method is required");
  for (const auto& m : plan.methods) {
    if (!is_method(m)) throw Error("plan: unknown method '" + m + "'");
  }
  if (plan.out.empty()) throw Error("plan: output directory is required");
  cf::validate(plan.config);
}

namespace {

/// Runs fn, prefixing any error with the stage name unless already tagged.
template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind(name + ":", 0) == 0) throw;
    throw Error(name + ": " + msg);
  } catch (const std::exception& e) {
    throw Error(name + ": " + e.what());
  }
}

void run_parallel(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::exception_ptr> errors(n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= n) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

cf::TrainConfig method_config(const cf::TrainConfig& base, const std::string& method, std::uint64_t seed) {
  cf::TrainConfig cfg = base;
  cfg.seed = seed;
  if (method != "nun") cfg.variant = cf::variant_from_string(method);
  return cfg;
}

std::vector<cf::CfResult> explain_nun(std::span<const MtsInstance> queries, const MtsDataset& train,
                                      const nn::SequenceClassifier& classifier, const cf::NunSettings& s) {
  const auto train_pred = cf::predict_all(classifier, train);
  std::vector<cf::CfResult> out;
  for (const auto& q : queries) {
    const Label pred = classifier.predict(q.values);
    const auto idx = baselines::find_nun_index(q.values, pred, train, train_pred);
    out.push_back(baselines::nun_substitute_cf(q, train[idx], classifier, s.window_len, s.max_segments).result);
  }
  return out;
}

json metrics_file(const std::string& method, std::uint64_t seed, const metrics::RunMetrics& m) {
  return {{"name", method}, {"seed", seed}, {"metrics", run_metrics_json(m)}};
}

}  // namespace

std::string tcv_curve_csv(const std::vector<cf::EpochLog>& history) {
  std::ostringstream out;
  out << "epoch,tcv,loss_g,loss_d\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.tcv) << ',' << format_double(h.loss_g) << ','
        << format_double(h.loss_d) << '\n';
  }
  return out.str();
}

LoadedData load_data(const fs::path& dir, bool znorm) {
  return stage("load", [&] {
    LoadedData d{load_dataset(dir, Split::train), load_dataset(dir, Split::test)};
    if (d.train.meta.signals != d.test.meta.signals || d.train.meta.length != d.test.meta.length) {
      throw Error("train and test shapes differ");
    }
    if (znorm) {
      d.train = z_normalize(d.train);
      d.test = z_normalize(d.test);
    }
    return d;
  });
}

namespace {

PipelineResult run_loaded(const ExperimentPlan& plan, const LoadedData& data) {
  validate(plan);
  fs::create_directories(plan.out);
  const auto& cfg = plan.config;

  const bool need_pool = std::any_of(plan.methods.begin(), plan.methods.end(), [&](const std::string& m) {
    return m != "nun" && baselines::derive_variant(method_config(cfg, m, 0)).use_shapelet;
  });
  shapelet::ShapeletPool pool;
  if (need_pool) {
    pool = stage("mine", [&] {
      auto p = shapelet::discover_pool(data.train, {cfg.discovery.k_pips, cfg.discovery.per_class,
                                                    cfg.discovery.max_length});
      shapelet::save_pool(p, plan.out / "pool.json");
      return p;
    });
  }

  const std::size_t S = plan.seeds.size();
  std::vector<cf::ClassifierBundle> classifiers(S);
  run_parallel(S, plan.jobs, [&](std::size_t i) {
    const auto seed = plan.seeds[i];
    classifiers[i] = stage("train-classifier", [&] {
      auto c = cf::train_classifier(data.train, cfg.classifier, seed);
      cf::save_classifier(c, plan.out / ("seed_" + std::to_string(seed)) / "classifier.json");
      return c;
    });
  });

  const std::size_t M = plan.methods.size();
  PipelineResult result;
  result.runs.resize(M * S);
  run_parallel(M * S, plan.jobs, [&](std::size_t job) {
    const auto& method = plan.methods[job / S];
    const std::size_t si = job % S;
    const auto seed = plan.seeds[si];
    const auto& classifier = classifiers[si].model;
    const auto run_cfg = method_config(cfg, method, seed);
    const fs::path dir = plan.out / ("seed_" + std::to_string(seed)) / method;
    auto& rec = result.runs[job];
    rec.method = method;
    rec.seed = seed;

    const auto queries = cf::select_queries(data.test, classifier, cfg.queried_label);
    if (queries.empty()) throw Error("explain: no test instance is predicted as the queried label");
    std::vector<cf::CfResult> cfs;
    if (method == "nun") {
      cfs = stage("explain", [&] { return explain_nun(queries, data.train, classifier, cfg.nun); });
    } else {
      const auto bundle = stage("train", [&] {
        auto b = cf::train(data.train, &pool, classifier, run_cfg);
        cf::save_bundle(b, dir / "model");
        return b;
      });
      rec.history = bundle.history;
      write_text(dir / "tcv_curve.csv", tcv_curve_csv(bundle.history));
      cfs = stage("explain", [&] { return cf::generate_cfs(queries, bundle, &pool, classifier); });
    }
    stage("explain", [&] {
      write_results(cfs, dir / "results.jsonl");
      for (std::size_t h = 0; h < std::min(plan.heatmaps, cfs.size()); ++h) {
        render_heatmap(cfs[h], dir / "heatmaps" / (cfs[h].id + ".svg"));
      }
    });
    rec.metrics = stage("eval", [&] { return metrics::evaluate(cfs, data.test, cfg.desired_label(), run_cfg); });
    write_text(dir / "metrics.json", metrics_file(method, seed, rec.metrics).dump(2) + "\n");
  });

  stage("report", [&] {
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<metrics::RunMetrics> runs;
      for (std::size_t s = 0; s < S; ++s) runs.push_back(result.runs[m * S + s].metrics);
      result.reports.push_back(metrics::aggregate(runs, plan.methods[m]));
    }
    render_report(result.reports, plan.out);
  });
  return result;
}

PipelineResult combine(const std::vector<std::pair<std::string, PipelineResult>>& arms, const fs::path& out) {
  PipelineResult all;
  for (const auto& [name, r] : arms) {
    for (auto rep : r.reports) {
      rep.name = r.reports.size() == 1 ? name : name + "/" + rep.name;
      all.reports.push_back(rep);
    }
    all.runs.insert(all.runs.end(), r.runs.begin(), r.runs.end());
  }
  stage("report", [&] { render_report(all.reports, out); });
  return all;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentPlan& plan) {
  validate(plan);
  const auto data = load_data(plan.dataset, plan.znorm);
  return run_loaded(plan, data);
}

PipelineResult ablate(const ExperimentPlan& plan, const std::string& toggle) {
  validate(plan);
  const auto data = load_data(plan.dataset, plan.znorm);
  if (toggle == "methods") {
    ExperimentPlan p = plan;
    p.methods = kAllMethods;
    return run_loaded(p, data);
  }
  bool cf::TrainConfig::*field = nullptr;
  if (toggle == "use_shapelet") field = &cf::TrainConfig::use_shapelet;
  if (toggle == "use_triplet") field = &cf::TrainConfig::use_triplet;
  if (toggle == "use_classifier_loss") field = &cf::TrainConfig::use_classifier_loss;
  if (toggle == "mask_residuals") field = &cf::TrainConfig::mask_residuals;
  if (field == nullptr) throw Error("ablate: unknown toggle '" + toggle + "'");
  std::vector<std::pair<std::string, PipelineResult>> arms;
  for (bool on : {true, false}) {
    ExperimentPlan p = plan;
    p.config.*field = on;
    const std::string name = toggle + (on ? "=on" : "=off");
    p.out = plan.out / name;
    arms.emplace_back(name, run_loaded(p, data));
  }
  return combine(arms, plan.out);
}

std::vector<SweepCell> sweep_cells(const ExperimentPlan& plan, const LoadedData& data) {
  std::vector<double> gammas = plan.config.margin.candidates;
  if (gammas.empty()) {
    gammas = stage("sweep", [&] {
      cf::TrainConfig cfg = plan.config;
      cfg.seed = plan.seeds.front();
      cfg.margin.mode = cf::MarginMode::auto_central;
      const auto c = cf::train_classifier(data.train, cfg.classifier, cfg.seed);
      return cf::initial_margin(data.train, c.model, cfg).candidates;
    });
  }
  std::vector<SweepCell> cells;
  for (double g : gammas) {
    for (auto n : kSweepTripletN) cells.push_back({g, n, "gamma=" + format_double(g) + ",n=" + std::to_string(n)});
  }
  return cells;
}

PipelineResult sweep(const ExperimentPlan& plan) {
  validate(plan);
  const auto data = load_data(plan.dataset, plan.znorm);
  std::vector<std::pair<std::string, PipelineResult>> arms;
  for (const auto& cell : sweep_cells(plan, data)) {
    ExperimentPlan p = plan;
    p.methods = {"trishgan"};
    p.config.margin.mode = cf::MarginMode::fixed;
    p.config.margin.gamma = cell.gamma;
    p.config.margin.candidates.clear();
    p.config.triplet_n = cell.triplet_n;
    p.out = plan.out / cell.name;
    arms.emplace_back(cell.name, run_loaded(p, data));
  }
  return combine(arms, plan.out);
}

}  // namespace cfts::harness
