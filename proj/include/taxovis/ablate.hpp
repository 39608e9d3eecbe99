#pragma once

#include <map>
#include <string>
#include <vector>

#include "taxovis/train.hpp"

namespace taxovis {

struct AblationRow {
  std::string label;
  std::map<std::string, EvalResult> eval;  // per dataset, val split
  double mean_ap = 0.0;                    // across evaluated datasets
};

struct AblationReport {
  std::string suite;
  std::vector<AblationRow> rows;
};

// Suites share the base config's seed and iteration budget so rows differ in
// exactly one axis:
//   components  - baseline, +selector/injection, +taxonomy loss
//   ratio       - sampling ratio grid over the three corpora
//   nt-size     - selector size sweep (clamped to K, deduplicated)
//   aggregation - cross-attention / add / concat, plus first-layer-only
//   zero-shot   - third corpus excluded from sampling, baseline vs full model
AblationReport run_suite(const std::string& suite, const RunConfig& base);

std::string report_table(const AblationReport& report);
std::string report_json(const AblationReport& report);
std::string bar_chart_svg(const AblationReport& report);

// Writes results.json, table.txt and plot.svg into out_dir.
void write_report(const AblationReport& report, const std::string& out_dir);

}  // namespace taxovis
