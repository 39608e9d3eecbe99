#include "taxovis/ablate.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxovis {

namespace {

using ordered_json = nlohmann::ordered_json;

AblationRow run_row(const std::string& label, const RunConfig& cfg) {
  AblationRow row;
  row.label = label;
  const TrainResult result = train(cfg);
  row.eval = result.final_eval;
  for (const auto& [id, r] : row.eval) row.mean_ap += r.ap;
  if (!row.eval.empty()) row.mean_ap /= static_cast<double>(row.eval.size());
  return row;
}

std::string ratio_label(const std::vector<double>& weights) {
  std::ostringstream out;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (i) out << ":";
    out << weights[i];
  }
  return out.str();
}

}  // namespace

AblationReport run_suite(const std::string& suite, const RunConfig& base) {
  AblationReport report;
  report.suite = suite;
  if (suite == "components") {
    // Row 1 is the plain joint-training baseline: no taxonomy modules and the
    // classification loss over the full union label space, so clips from one
    // corpus compete against every other corpus's categories.
    RunConfig off = base;
    off.use_taxonomy = false;
    off.lambda_taxo = 0.0;
    off.score_aux = false;
    off.union_softmax = true;
    RunConfig on = base;
    on.use_taxonomy = true;
    on.lambda_taxo = 0.0;
    on.score_aux = true;
    on.union_softmax = false;
    RunConfig full = on;
    full.lambda_taxo = base.lambda_taxo > 0 ? base.lambda_taxo : 0.5;
    report.rows.push_back(run_row("baseline", off));
    report.rows.push_back(run_row("+tcm-tim", on));
    report.rows.push_back(run_row("+taxonomy-loss", full));
  } else if (suite == "ratio") {
    if (base.datasets.size() != 3) {
      throw std::invalid_argument("ratio suite expects exactly three datasets");
    }
    const std::vector<std::vector<double>> grid = {
        {2, 1, 0.75}, {1, 1, 0.75}, {1, 1, 1}, {2, 1, 1}};
    for (const std::vector<double>& weights : grid) {
      RunConfig cfg = base;
      cfg.ratios.clear();
      for (size_t i = 0; i < weights.size(); ++i) {
        cfg.ratios.emplace_back(cfg.datasets[i].dataset_id, weights[i]);
      }
      report.rows.push_back(run_row(ratio_label(weights), cfg));
    }
  } else if (suite == "nt-size") {
    const int K = make_context(base).space.K();
    std::vector<int> sizes;
    for (int n : {1, 2, 5, 10, 15, 20, 50, K}) {
      const int clamped = std::min(n, K);
      if (std::find(sizes.begin(), sizes.end(), clamped) == sizes.end()) {
        sizes.push_back(clamped);
      }
    }
    for (int n : sizes) {
      RunConfig cfg = base;
      cfg.use_taxonomy = true;
      cfg.n_t = n;
      const std::string label = "n_t=" + std::to_string(n) + (n == K ? " (K)" : "");
      report.rows.push_back(run_row(label, cfg));
    }
  } else if (suite == "aggregation") {
    for (Aggregation agg : {Aggregation::kCrossAttention, Aggregation::kAdd,
                            Aggregation::kConcat}) {
      RunConfig cfg = base;
      cfg.use_taxonomy = true;
      cfg.aggregation = agg;
      report.rows.push_back(run_row(name(agg), cfg));
    }
    RunConfig first = base;
    first.use_taxonomy = true;
    first.injection = InjectionMode::kFirstLayerOnly;
    report.rows.push_back(run_row("cross-attention/first-layer", first));
  } else if (suite == "zero-shot") {
    if (base.datasets.size() < 2) {
      throw std::invalid_argument("zero-shot suite expects at least two datasets");
    }
    RunConfig cfg = base;
    cfg.ratios.clear();
    for (size_t i = 0; i < cfg.datasets.size(); ++i) {
      const bool held_out = i + 1 == cfg.datasets.size();
      cfg.ratios.emplace_back(cfg.datasets[i].dataset_id, held_out ? 0.0 : 1.0);
    }
    RunConfig off = cfg;
    off.use_taxonomy = false;
    off.lambda_taxo = 0.0;
    off.score_aux = false;
    report.rows.push_back(run_row("baseline", off));
    report.rows.push_back(run_row("tmt", cfg));
  } else {
    throw std::invalid_argument("unknown suite: " + suite);
  }
  return report;
}

std::string report_table(const AblationReport& report) {
  std::vector<std::string> datasets;
  if (!report.rows.empty()) {
    for (const auto& [id, r] : report.rows.front().eval) datasets.push_back(id);
  }
  size_t label_w = 5;
  for (const AblationRow& row : report.rows) label_w = std::max(label_w, row.label.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_w + 2)) << "row";
  for (const std::string& id : datasets) out << std::setw(10) << (id + " AP");
  out << std::setw(10) << "mean AP" << "\n";
  out << std::fixed << std::setprecision(2);
  for (const AblationRow& row : report.rows) {
    out << std::setw(static_cast<int>(label_w + 2)) << row.label;
    for (const std::string& id : datasets) out << std::setw(10) << row.eval.at(id).ap;
    out << std::setw(10) << row.mean_ap << "\n";
  }
  return out.str();
}

std::string report_json(const AblationReport& report) {
  ordered_json j;
  j["suite"] = report.suite;
  j["rows"] = ordered_json::array();
  for (const AblationRow& row : report.rows) {
    ordered_json r;
    r["label"] = row.label;
    r["mean_ap"] = row.mean_ap;
    for (const auto& [id, ev] : row.eval) {
      r["eval"][id] = {{"ap", ev.ap},   {"ap50", ev.ap50}, {"ap75", ev.ap75},
                       {"ar1", ev.ar1}, {"ar10", ev.ar10}};
    }
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string bar_chart_svg(const AblationReport& report) {
  const int bar_h = 24, gap = 8, left = 220, width = 640;
  const int height = gap + static_cast<int>(report.rows.size()) * (bar_h + gap) + 24;
  double max_ap = 1.0;
  for (const AblationRow& row : report.rows) max_ap = std::max(max_ap, row.mean_ap);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"monospace\" font-size=\"13\">\n";
  svg << "  <text x=\"8\" y=\"16\">" << report.suite << ": mean AP</text>\n";
  int y = gap + 24;
  svg << std::fixed << std::setprecision(2);
  for (const AblationRow& row : report.rows) {
    const double w = (width - left - 60) * (row.mean_ap / max_ap);
    svg << "  <text x=\"8\" y=\"" << y + 16 << "\">" << row.label << "</text>\n";
    svg << "  <rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << std::max(1.0, w)
        << "\" height=\"" << bar_h << "\" fill=\"#4878a8\"/>\n";
    svg << "  <text x=\"" << left + std::max(1.0, w) + 6 << "\" y=\"" << y + 16 << "\">"
        << row.mean_ap << "</text>\n";
    y += bar_h + gap;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_report(const AblationReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir + "/results.json") << report_json(report);
  std::ofstream(out_dir + "/table.txt") << report_table(report);
  std::ofstream(out_dir + "/plot.svg") << bar_chart_svg(report);
}

}  // namespace taxovis
