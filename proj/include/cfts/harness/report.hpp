#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfts/cf/train.hpp"
#include "cfts/metrics/metrics.hpp"

namespace cfts::harness {

/// Rounds the shortest decimal form of x to `decimals` places, half away
/// from zero.
std::string round_decimal(double x, int decimals = 3);

/// "mean ± std" at 3 decimals.
std::string format_stat(const metrics::Stat& s);

/// Writes `<dir>/report.csv` and `<dir>/report.json`.
void render_report(std::span<const metrics::MetricsReport> reports, const std::filesystem::path& dir);
nlohmann::json report_json(std::span<const metrics::MetricsReport> reports);
std::string report_csv(std::span<const metrics::MetricsReport> reports);

/// V x T grid, one rect per cell, opacity |r| / max|r|.
std::string heatmap_svg(const Series& residual);
void render_heatmap(const cf::CfResult& result, const std::filesystem::path& path);

// ---- results files -------------------------------------------------------

struct StoredResult {
  std::string id;
  double p_orig = 0.5;
  double p_cf = 0.5;
  bool flipped = false;
  Series residual;
};

nlohmann::json result_to_json(const cf::CfResult& r);
StoredResult result_from_json(const nlohmann::json& j);
void write_results(std::span<const cf::CfResult> results, const std::filesystem::path& path);
std::vector<StoredResult> read_results(const std::filesystem::path& path);

/// Rebuilds full results by matching ids against the dataset.
std::vector<cf::CfResult> attach_queries(std::span<const StoredResult> stored, const MtsDataset& ds);

nlohmann::json run_metrics_json(const metrics::RunMetrics& m);
metrics::RunMetrics run_metrics_from_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cfts::harness
