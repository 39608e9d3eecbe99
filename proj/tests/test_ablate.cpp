#include "taxovis/ablate.hpp"

#include <filesystem>

#include "doctest.h"
#include "test_util.hpp"

using namespace taxovis;

namespace {

RunConfig ablate_base() {
  RunConfig cfg = preset("tmt-tiny");
  for (SyntheticDatasetSpec& d : cfg.datasets) {
    d.clip_count = 4;
    d.T = 2;
    d.H = d.W = 32;
    d.min_instances = 1;
    d.max_instances = 2;
  }
  cfg.val_clips = 2;
  cfg.iterations = 0;  // architecture rows only; no optimizer steps
  return cfg;
}

}  // namespace

TEST_CASE("ratio rows differ only in sampling and evaluate identically at init") {
  const AblationReport report = run_suite("ratio", ablate_base());
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].label == "2:1:0.75");
  CHECK(report.rows[2].label == "1:1:1");
  for (const AblationRow& row : report.rows) {
    // No steps taken, so every row scores the shared initialization.
    CHECK(row.mean_ap == report.rows[0].mean_ap);  // bitwise
    for (const auto& [id, ev] : row.eval) {
      CHECK(std::isfinite(ev.ap));
      CHECK(ev.ap >= 0.0);
      CHECK(ev.ap <= 100.0);
    }
  }
}

TEST_CASE("component rows cover the variant ladder") {
  const AblationReport report = run_suite("components", ablate_base());
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].label == "baseline");
  CHECK(report.rows[1].label == "+tcm-tim");
  CHECK(report.rows[2].label == "+taxonomy-loss");
  for (const AblationRow& row : report.rows) {
    CHECK(row.eval.size() == 3);
    CHECK(std::isfinite(row.mean_ap));
  }
}

TEST_CASE("selector sweep clamps and deduplicates sizes") {
  const AblationReport report = run_suite("nt-size", ablate_base());
  const int K = make_context(ablate_base()).space.K();
  REQUIRE(!report.rows.empty());
  CHECK(report.rows.back().label == "n_t=" + std::to_string(K) + " (K)");
  for (size_t i = 1; i < report.rows.size(); ++i) {
    CHECK(report.rows[i].label != report.rows[i - 1].label);
  }
}

TEST_CASE("unknown suites are rejected") {
  CHECK_THROWS_AS(run_suite("bogus", ablate_base()), std::invalid_argument);
}

TEST_CASE("reports render as table, json and svg") {
  AblationReport report;
  report.suite = "demo";
  AblationRow a;
  a.label = "baseline";
  a.eval["alpha"].ap = 10.0;
  a.eval["alpha"].ap50 = 20.0;
  a.mean_ap = 10.0;
  AblationRow b;
  b.label = "tmt";
  b.eval["alpha"].ap = 30.0;
  b.mean_ap = 30.0;
  report.rows = {a, b};

  const std::string table = report_table(report);
  CHECK(table.find("baseline") != std::string::npos);
  CHECK(table.find("alpha AP") != std::string::npos);
  CHECK(table.find("30.00") != std::string::npos);

  const std::string json = report_json(report);
  CHECK(json.find("\"suite\": \"demo\"") != std::string::npos);
  CHECK(json.find("\"mean_ap\": 30.0") != std::string::npos);

  const std::string svg = bar_chart_svg(report);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("demo: mean AP") != std::string::npos);
  CHECK(svg.find("<rect") != std::string::npos);

  const std::string dir = testutil::temp_dir("ablate") + "/report";
  std::filesystem::remove_all(dir);
  write_report(report, dir);
  CHECK(std::filesystem::exists(dir + "/results.json"));
  CHECK(std::filesystem::exists(dir + "/table.txt"));
  CHECK(std::filesystem::exists(dir + "/plot.svg"));
}
