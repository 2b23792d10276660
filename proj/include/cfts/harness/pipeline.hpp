#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfts/cf/config.hpp"
#include "cfts/metrics/metrics.hpp"

namespace cfts::harness {

/// A method is a generator variant name (trishgan, sparse, countergan, gan)
/// or "nun" for the window-substitution baseline.
bool is_method(const std::string& name);
inline const std::vector<std::string> kAllMethods{"trishgan", "sparse", "countergan", "gan", "nun"};

struct ExperimentPlan {
  std::filesystem::path dataset;  // directory holding meta.json, train.csv, test.csv
  cf::TrainConfig config;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::string> methods{"trishgan"};
  std::filesystem::path out;
  bool znorm = false;
  std::size_t jobs = 1;
  std::size_t heatmaps = 0;  // per seed and method
};

void validate(const ExperimentPlan& plan);

struct LoadedData {
  MtsDataset train;
  MtsDataset test;
};

LoadedData load_data(const std::filesystem::path& dir, bool znorm);

/// Output of one (method, seed) job.
struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  metrics::RunMetrics metrics;
  std::vector<cf::EpochLog> history;
};

struct PipelineResult {
  std::vector<metrics::MetricsReport> reports;  // one per method, plan order
  std::vector<RunRecord> runs;                  // method-major, then seed
};

/// mine -> train-classifier -> train -> explain -> eval for every method and
/// seed. Layout under plan.out:
///   pool.json
///   seed_<s>/classifier.json
///   seed_<s>/<method>/{model/, results.jsonl, tcv_curve.csv, metrics.json}
///   report.csv, report.json
PipelineResult run_pipeline(const ExperimentPlan& plan);

/// Toggles: use_shapelet, use_triplet, use_classifier_loss, mask_residuals
/// (two rows each, "<toggle>=on" then "=off") or methods (a row per method).
/// Each arm runs in `<out>/<row name>/`; the combined report lands in `out`.
PipelineResult ablate(const ExperimentPlan& plan, const std::string& toggle);

inline const std::vector<std::size_t> kSweepTripletN{2, 4, 6, 8};

struct SweepCell {
  double gamma = 0.0;
  std::size_t triplet_n = 0;
  std::string name;
};

/// Margin candidates (explicit in the config, else from the central-margin
/// rule using the first seed's classifier) crossed with triplet_n.
std::vector<SweepCell> sweep_cells(const ExperimentPlan& plan, const LoadedData& data);
PipelineResult sweep(const ExperimentPlan& plan);

std::string tcv_curve_csv(const std::vector<cf::EpochLog>& history);

}  // namespace cfts::harness
