// Command-line harness: corpus generation, training, evaluation, ablation
// suites and run reports.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "taxovis/ablate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace taxovis;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

ordered_json eval_json(const EvalResult& r, const TaxonomySpace* space) {
  ordered_json j{{"ap", r.ap},   {"ap50", r.ap50}, {"ap75", r.ap75},
                 {"ar1", r.ar1}, {"ar10", r.ar10}};
  for (const auto& [cat, ap] : r.per_category_ap) {
    j["per_category_ap"][space ? space->at(cat).name : std::to_string(cat)] = ap;
  }
  return j;
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string line_chart_svg(const std::string& title, const std::vector<Series>& series) {
  const int width = 720, height = 400, left = 64, right = 140, top = 36, bottom = 40;
  const double px = left, pw = width - left - right;
  const double py = top, ph = height - top - bottom;
  static const char* colors[] = {"#4878a8", "#a85448", "#58a868", "#a88f48", "#7858a8"};

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) x0 = x1 = x, y0 = y1 = y, first = false;
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto sx = [&](double x) { return px + pw * (x - x0) / (x1 - x0); };
  auto sy = [&](double y) { return py + ph * (1.0 - (y - y0) / (y1 - y0)); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"monospace\" font-size=\"12\">\n";
  svg << "  <text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << title << "</text>\n";
  svg << "  <rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    svg << "  <text x=\"4\" y=\"" << sy(v) + 4 << "\">" << v << "</text>\n";
    svg << "  <line x1=\"" << px << "\" y1=\"" << sy(v) << "\" x2=\"" << px + pw
        << "\" y2=\"" << sy(v) << "\" stroke=\"#ddd\"/>\n";
  }
  svg << "  <text x=\"" << px << "\" y=\"" << height - 12 << "\">" << x0 << "</text>\n";
  svg << "  <text x=\"" << px + pw - 40 << "\" y=\"" << height - 12 << "\">" << x1
      << "</text>\n";
  int idx = 0;
  for (const Series& s : series) {
    const char* color = colors[idx % 5];
    std::ostringstream pts;
    const size_t stride = std::max<size_t>(1, s.points.size() / 2000);
    for (size_t i = 0; i < s.points.size(); i += stride) {
      pts << sx(s.points[i].first) << "," << sy(s.points[i].second) << " ";
    }
    svg << "  <polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    svg << "  <text x=\"" << px + pw + 8 << "\" y=\"" << top + 16 + 18 * idx
        << "\" fill=\"" << color << "\">" << s.label << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_synth(const std::string& spec_arg, const std::string& out_dir) {
  SyntheticDatasetSpec spec;
  if (is_stock_spec(spec_arg)) {
    spec = stock_spec(spec_arg);
  } else {
    spec = spec_from_json(slurp(spec_arg));
  }
  const Corpus corpus = generate_corpus(spec);
  save_corpus(corpus, out_dir);
  std::cout << "wrote " << corpus.clips.size() << " clips for '" << spec.dataset_id
            << "' (" << spec.categories.size() << " categories) to " << out_dir << "\n";
}

void cmd_train(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = load_config(config_path);
  const TrainResult result = train(cfg, out_dir);
  std::cout << "trained " << cfg.iterations << " iterations; checkpoint in " << out_dir
            << "\n";
  for (const auto& [id, ev] : result.final_eval) {
    std::cout << std::fixed << std::setprecision(2) << "  " << id << ": AP " << ev.ap
              << "  AP50 " << ev.ap50 << "  AR10 " << ev.ar10 << "\n";
  }
}

void cmd_eval(const std::string& ckpt_path, const std::string& data_dir, bool zero_shot,
              bool with_recall) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const RunConfig cfg = config_from_json(ck.config_json);
  const TaxonomySpace space = space_from_json(ck.space_json);
  Corpus data = load_corpus(data_dir);

  // A corpus identical to a trained-on spec overlaps the training clips, so
  // reuse the training holdout: keep the trailing val_clips clips.
  std::string split = "full";
  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    if (spec_hash(d) != spec_hash(data.spec)) continue;
    double ratio = 0.0;
    for (const auto& [id, r] : cfg.ratios) {
      if (id == data.spec.dataset_id) ratio = r;
    }
    if (ratio > 0.0) {
      data.clips.erase(data.clips.begin(),
                       data.clips.end() - std::min<std::ptrdiff_t>(
                                              cfg.val_clips, std::ssize(data.clips)));
      split = "val";
    }
  }

  const EvalResult r = evaluate_checkpoint(ck, data, zero_shot);
  ordered_json out{{"dataset", data.spec.dataset_id},
                   {"split", split},
                   {"clips", data.clips.size()},
                   {"zero_shot", zero_shot}};
  out.update(eval_json(r, &space));
  if (with_recall) out["tcm_recall"] = tcm_recall_checkpoint(ck, data);
  std::cout << out.dump(2) << "\n";
}

void cmd_ablate(const std::string& suite, const std::string& out_dir,
                const std::string& config_path) {
  const RunConfig base =
      config_path.empty() ? preset("tmt-tiny") : load_config(config_path);
  const AblationReport report = run_suite(suite, base);
  write_report(report, out_dir);
  std::cout << report_table(report) << "report in " << out_dir << "\n";
}

void cmd_report(const std::string& run_dir) {
  std::ifstream metrics(run_dir + "/metrics.jsonl");
  if (!metrics) throw std::runtime_error("no metrics.jsonl in " + run_dir);

  Series loss{"total", {}};
  std::map<std::string, Series> eval_ap;
  std::string line;
  while (std::getline(metrics, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.contains("eval")) {
      const std::string id = j["eval"];
      eval_ap[id].label = id;
      eval_ap[id].points.emplace_back(j["iter"].get<double>(), j["ap"].get<double>());
    } else if (j.contains("total")) {
      loss.points.emplace_back(j["iter"].get<double>(), j["total"].get<double>());
    }
  }
  if (loss.points.empty()) throw std::runtime_error("metrics.jsonl has no loss rows");

  double min_loss = loss.points.front().second;
  for (const auto& [_, v] : loss.points) min_loss = std::min(min_loss, v);
  ordered_json rep{{"run", run_dir},
                   {"iterations", loss.points.size()},
                   {"loss",
                    {{"first", loss.points.front().second},
                     {"last", loss.points.back().second},
                     {"min", min_loss}}}};
  if (fs::exists(run_dir + "/final_eval.json")) {
    rep["final_eval"] = json::parse(slurp(run_dir + "/final_eval.json"));
  }
  spit(run_dir + "/report.json", rep.dump(2) + "\n");
  spit(run_dir + "/loss.svg", line_chart_svg("training loss", {loss}));
  if (!eval_ap.empty()) {
    std::vector<Series> series;
    for (const auto& [_, s] : eval_ap) series.push_back(s);
    spit(run_dir + "/eval.svg", line_chart_svg("validation AP", series));
  }
  std::cout << rep.dump(2) << "\nplots in " << run_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taxonomy-aware multi-dataset video instance segmentation"};
  app.require_subcommand(1);

  std::string spec_arg, out_dir, config_path, ckpt_path, data_dir, suite, run_dir;
  bool zero_shot = false, with_recall = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a corpus from a dataset spec");
  synth->add_option("--spec", spec_arg, "stock corpus name or spec JSON file")->required();
  synth->add_option("--out", out_dir, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config_path, "run config JSON file")->required();
  train->add_option("--out", out_dir, "run output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "corpus directory")->required();
  eval->add_flag("--zero-shot", zero_shot,
                 "require that the corpus was excluded from training");
  eval->add_flag("--tcm-recall", with_recall, "also report selector recall");

  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation suite");
  ablate->add_option("--suite", suite,
                     "components | ratio | nt-size | aggregation | zero-shot")
      ->required();
  ablate->add_option("--out", out_dir, "report output directory")->required();
  ablate->add_option("--config", config_path, "base run config (default: tmt-tiny)");

  CLI::App* report = app.add_subcommand("report", "summarize a training run directory");
  report->add_option("--run", run_dir, "run directory written by train")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (synth->parsed()) cmd_synth(spec_arg, out_dir);
    if (train->parsed()) cmd_train(config_path, out_dir);
    if (eval->parsed()) cmd_eval(ckpt_path, data_dir, zero_shot, with_recall);
    if (ablate->parsed()) cmd_ablate(suite, out_dir, config_path);
    if (report->parsed()) cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
