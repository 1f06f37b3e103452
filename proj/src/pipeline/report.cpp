#include "pdac/pipeline/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace pdac::pipeline {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// linear-interpolation quantile over a sorted copy
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v.front();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace

void write_results_csv(const std::string& path,
                       const std::vector<RunResult>& runs) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  f << "row,seed,mcc,accuracy,auc_roc\n";
  for (const auto& r : runs)
    f << row_name(r.row) << "," << r.seed << "," << fmt(r.mcc) << ","
      << fmt(r.accuracy) << "," << fmt(r.auc_roc) << "\n";
  if (!f) throw OrchestrationError("cannot write " + path);
}

void write_results_json(const std::string& path,
                        const std::vector<RunResult>& runs,
                        const std::vector<RowSummary>& summaries) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs)
    j["runs"].push_back({{"row", row_name(r.row)},
                         {"seed", r.seed},
                         {"mcc", r.mcc},
                         {"accuracy", r.accuracy},
                         {"auc_roc", r.auc_roc}});
  j["summary"] = nlohmann::json::array();
  for (const auto& s : summaries)
    j["summary"].push_back(
        {{"row", row_name(s.row)},
         {"mcc", {{"mean", s.mcc.mean}, {"stddev", s.mcc.stddev}}},
         {"accuracy",
          {{"mean", s.accuracy.mean}, {"stddev", s.accuracy.stddev}}},
         {"auc_roc",
          {{"mean", s.auc_roc.mean}, {"stddev", s.auc_roc.stddev}}}});
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) throw OrchestrationError("cannot write " + path);
}

void write_mcc_boxplot(const std::string& path,
                       const std::vector<RowSummary>& summaries) {
  const double width = 120.0 * static_cast<double>(summaries.size()) + 80.0;
  const double height = 360.0;
  const double plot_top = 30.0, plot_bottom = 320.0, plot_left = 60.0;
  // fixed [-1, 1] axis keeps plots from different runs comparable
  auto ycoord = [&](double mcc) {
    return plot_bottom - (mcc + 1.0) / 2.0 * (plot_bottom - plot_top);
  };

  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
    << "\" height=\"" << fmt(height) << "\" font-family=\"sans-serif\" "
    << "font-size=\"12\">\n";
  f << "<text x=\"10\" y=\"18\">MCC per ablation row</text>\n";
  for (double tick : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const double y = ycoord(tick);
    f << "<line x1=\"" << fmt(plot_left) << "\" y1=\"" << fmt(y) << "\" x2=\""
      << fmt(width - 20.0) << "\" y2=\"" << fmt(y)
      << "\" stroke=\"#dddddd\"/>\n";
    f << "<text x=\"14\" y=\"" << fmt(y + 4.0) << "\">" << fmt(tick)
      << "</text>\n";
  }
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    const auto& v = s.mcc.values;
    if (v.empty()) continue;
    const double cx = plot_left + 60.0 + 120.0 * static_cast<double>(i);
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5),
                 q3 = quantile(v, 0.75);
    const double half = 35.0;
    f << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(ycoord(lo))
      << "\" x2=\"" << fmt(cx) << "\" y2=\"" << fmt(ycoord(hi))
      << "\" stroke=\"#333333\"/>\n";
    for (double whisker : {lo, hi})
      f << "<line x1=\"" << fmt(cx - half / 2.0) << "\" y1=\""
        << fmt(ycoord(whisker)) << "\" x2=\"" << fmt(cx + half / 2.0)
        << "\" y2=\"" << fmt(ycoord(whisker)) << "\" stroke=\"#333333\"/>\n";
    f << "<rect x=\"" << fmt(cx - half) << "\" y=\"" << fmt(ycoord(q3))
      << "\" width=\"" << fmt(2.0 * half) << "\" height=\""
      << fmt(std::max(ycoord(q1) - ycoord(q3), 1.0))
      << "\" fill=\"#9ecae1\" stroke=\"#333333\"/>\n";
    f << "<line x1=\"" << fmt(cx - half) << "\" y1=\"" << fmt(ycoord(q2))
      << "\" x2=\"" << fmt(cx + half) << "\" y2=\"" << fmt(ycoord(q2))
      << "\" stroke=\"#08306b\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << fmt(cx - half) << "\" y=\"" << fmt(plot_bottom + 20.0)
      << "\">" << row_name(s.row) << "</text>\n";
  }
  f << "</svg>\n";
  if (!f) throw OrchestrationError("cannot write " + path);
}

}  // namespace pdac::pipeline
