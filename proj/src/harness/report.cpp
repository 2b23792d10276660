#include "cfts/harness/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cfts::harness {

using nlohmann::json;

std::string round_decimal(double x, int decimals) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, std::abs(x), std::chars_format::fixed);
  std::string s(buf, res.ptr);
  const auto dot = s.find('.');
  std::string whole = dot == std::string::npos ? s : s.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  const bool up = static_cast<int>(frac.size()) > decimals && frac[static_cast<std::size_t>(decimals)] >= '5';
  frac.resize(static_cast<std::size_t>(decimals), '0');
  std::string digits = whole + frac;
  if (up) {
    int i = static_cast<int>(digits.size()) - 1;
    for (; i >= 0; --i) {
      if (digits[static_cast<std::size_t>(i)] == '9') {
        digits[static_cast<std::size_t>(i)] = '0';
      } else {
        ++digits[static_cast<std::size_t>(i)];
        break;
      }
    }
    if (i < 0) digits.insert(digits.begin(), '1');
  }
  std::string out = digits.substr(0, digits.size() - static_cast<std::size_t>(decimals));
  if (decimals > 0) out += "." + digits.substr(digits.size() - static_cast<std::size_t>(decimals));
  const bool zero = out.find_first_not_of("0.") == std::string::npos;
  return (x < 0 && !zero ? "-" : "") + out;
}

std::string format_stat(const metrics::Stat& s) { return round_decimal(s.mean) + " ± " + round_decimal(s.std); }

namespace {

struct Column {
  const char* name;
  metrics::Stat metrics::MetricsReport::*field;
};

constexpr Column kColumns[] = {
    {"tcv", &metrics::MetricsReport::tcv},
    {"robustness", &metrics::MetricsReport::robustness},
    {"proximity", &metrics::MetricsReport::proximity},
    {"sparsity", &metrics::MetricsReport::sparsity},
    {"plausibility", &metrics::MetricsReport::plausibility},
    {"boundary_dist", &metrics::MetricsReport::boundary_dist},
};

}  // namespace

json report_json(std::span<const metrics::MetricsReport> reports) {
  if (reports.empty()) throw Error("report: no rows");
  json rows = json::array();
  for (const auto& r : reports) {
    json m = json::object();
    for (const auto& c : kColumns) {
      const auto& s = r.*(c.field);
      m[c.name] = {{"mean", s.mean}, {"std", s.std}, {"text", format_stat(s)}};
    }
    rows.push_back({{"method", r.name}, {"runs", r.runs}, {"metrics", m}});
  }
  return {{"rows", rows}};
}

std::string report_csv(std::span<const metrics::MetricsReport> reports) {
  if (reports.empty()) throw Error("report: no rows");
  std::ostringstream out;
  out << "method,runs";
  for (const auto& c : kColumns) out << ',' << c.name;
  out << '\n';
  for (const auto& r : reports) {
    out << r.name << ',' << r.runs;
    for (const auto& c : kColumns) out << ',' << format_stat(r.*(c.field));
    out << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("I/O failure writing " + path.string());
}

void render_report(std::span<const metrics::MetricsReport> reports, const std::filesystem::path& dir) {
  const auto csv = report_csv(reports);
  const auto js = report_json(reports).dump(2) + "\n";
  write_text(dir / "report.csv", csv);
  write_text(dir / "report.json", js);
}

std::string heatmap_svg(const Series& r) {
  constexpr int cell = 12;
  const double peak = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << r.cols() * cell << "\" height=\"" << r.rows() * cell
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Eigen::Index v = 0; v < r.rows(); ++v) {
    for (Eigen::Index t = 0; t < r.cols(); ++t) {
      const double a = peak > 0 ? std::abs(r(v, t)) / peak : 0.0;
      if (a <= 0) continue;
      const char* color = r(v, t) > 0 ? "#b2182b" : "#2166ac";
      out << "<rect x=\"" << t * cell << "\" y=\"" << v * cell << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"" << color << "\" fill-opacity=\"" << round_decimal(a, 4) << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void render_heatmap(const cf::CfResult& result, const std::filesystem::path& path) {
  write_text(path, heatmap_svg(result.residual));
}

json result_to_json(const cf::CfResult& r) {
  const auto& res = r.residual;
  const auto nonzero = (res.array() != 0.0).count();
  json residual;
  if (2 * nonzero < res.size()) {
    json cells = json::array();
    for (Eigen::Index v = 0; v < res.rows(); ++v) {
      for (Eigen::Index t = 0; t < res.cols(); ++t) {
        if (res(v, t) != 0.0) cells.push_back({v, t, res(v, t)});
      }
    }
    residual = {{"shape", {res.rows(), res.cols()}}, {"cells", cells}};
  } else {
    residual = json::array();
    for (Eigen::Index v = 0; v < res.rows(); ++v) {
      std::vector<double> row(static_cast<std::size_t>(res.cols()));
      for (Eigen::Index t = 0; t < res.cols(); ++t) row[static_cast<std::size_t>(t)] = res(v, t);
      residual.push_back(row);
    }
  }
  return {{"id", r.id}, {"p_orig", r.p_orig}, {"p_cf", r.p_cf}, {"flipped", r.flipped}, {"residual", residual}};
}

StoredResult result_from_json(const json& j) {
  StoredResult s;
  s.id = j.at("id").get<std::string>();
  s.p_orig = j.at("p_orig").get<double>();
  s.p_cf = j.at("p_cf").get<double>();
  s.flipped = j.at("flipped").get<bool>();
  const auto& r = j.at("residual");
  if (r.is_object()) {
    const auto shape = r.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw Error("results: residual shape must have two entries");
    s.residual = Series::Zero(shape[0], shape[1]);
    for (const auto& c : r.at("cells")) {
      const auto v = c.at(0).get<Eigen::Index>(), t = c.at(1).get<Eigen::Index>();
      if (v < 0 || v >= shape[0] || t < 0 || t >= shape[1]) throw Error("results: residual cell out of range");
      s.residual(v, t) = c.at(2).get<double>();
    }
  } else {
    const auto rows = r.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw Error("results: empty residual");
    s.residual.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t v = 0; v < rows.size(); ++v) {
      if (rows[v].size() != rows.front().size()) throw Error("results: ragged residual");
      for (std::size_t t = 0; t < rows[v].size(); ++t) {
        s.residual(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(t)) = rows[v][t];
      }
    }
  }
  return s;
}

void write_results(std::span<const cf::CfResult> results, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : results) text += result_to_json(r).dump() + "\n";
  write_text(path, text);
}

std::vector<StoredResult> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  std::vector<StoredResult> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<cf::CfResult> attach_queries(std::span<const StoredResult> stored, const MtsDataset& ds) {
  std::map<std::string, const MtsInstance*> by_id;
  for (const auto& inst : ds.instances) by_id[inst.id] = &inst;
  std::vector<cf::CfResult> out;
  for (const auto& s : stored) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw Error("results: id '" + s.id + "' not found in the dataset");
    const auto& q = it->second->values;
    if (q.rows() != s.residual.rows() || q.cols() != s.residual.cols()) {
      throw Error("results: residual shape does not match instance " + s.id);
    }
    cf::CfResult r;
    r.id = s.id;
    r.query = q;
    r.residual = s.residual;
    r.x_cf = q + s.residual;
    r.p_orig = s.p_orig;
    r.p_cf = s.p_cf;
    r.flipped = s.flipped;
    out.push_back(std::move(r));
  }
  return out;
}

json run_metrics_json(const metrics::RunMetrics& m) {
  return {{"tcv", m.tcv},
          {"robustness", m.robustness},
          {"boundary_dist", m.boundary_dist},
          {"proximity", m.proximity},
          {"sparsity", m.sparsity},
          {"plausibility", m.plausibility}};
}

metrics::RunMetrics run_metrics_from_json(const json& j) {
  metrics::RunMetrics m;
  m.tcv = j.at("tcv").get<double>();
  m.robustness = j.at("robustness").get<double>();
  m.boundary_dist = j.at("boundary_dist").get<double>();
  m.proximity = j.at("proximity").get<double>();
  m.sparsity = j.at("sparsity").get<double>();
  m.plausibility = j.at("plausibility").get<double>();
  return m;
}

}  // namespace cfts::harness
