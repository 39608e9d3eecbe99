#include "taxovis/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxovis {

using ordered_json = nlohmann::ordered_json;

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = 1;
  j["model"] = {{"n_queries", cfg.n_queries}, {"C", cfg.C},
                {"D", cfg.D},                 {"layers", cfg.layers},
                {"heads", cfg.heads},         {"n_t", cfg.n_t},
                {"d_text", cfg.d_text},       {"d_mid", cfg.d_mid},
                {"d_mask", cfg.d_mask},       {"ffn_hidden", cfg.ffn_hidden}};
  j["variant"] = {{"use_taxonomy", cfg.use_taxonomy},
                  {"aggregation", name(cfg.aggregation)},
                  {"injection", name(cfg.injection)},
                  {"score_aux", cfg.score_aux}};
  j["loss"] = {{"lambda_cls", cfg.lambda_cls},
               {"lambda_taxo", cfg.lambda_taxo},
               {"lambda_bce", cfg.lambda_bce},
               {"lambda_dice", cfg.lambda_dice},
               {"null_weight", cfg.null_weight},
               {"union_softmax", cfg.union_softmax}};
  j["datasets"] = ordered_json::array();
  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    j["datasets"].push_back(ordered_json::parse(spec_to_json(d)));
  }
  j["ratios"] = ordered_json::array();
  for (const auto& [id, r] : cfg.ratios) j["ratios"].push_back({id, r});
  j["val_clips"] = cfg.val_clips;
  j["optimizer"] = {{"step_size", cfg.step_size},
                    {"iterations", cfg.iterations},
                    {"eval_every", cfg.eval_every}};
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1) {
    throw std::invalid_argument("config: missing or unsupported schema_version");
  }
  RunConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    cfg.n_queries = m.value("n_queries", cfg.n_queries);
    cfg.C = m.value("C", cfg.C);
    cfg.D = m.value("D", cfg.D);
    cfg.layers = m.value("layers", cfg.layers);
    cfg.heads = m.value("heads", cfg.heads);
    cfg.n_t = m.value("n_t", cfg.n_t);
    cfg.d_text = m.value("d_text", cfg.d_text);
    cfg.d_mid = m.value("d_mid", cfg.d_mid);
    cfg.d_mask = m.value("d_mask", cfg.d_mask);
    cfg.ffn_hidden = m.value("ffn_hidden", cfg.ffn_hidden);
  }
  if (j.contains("variant")) {
    const auto& v = j.at("variant");
    cfg.use_taxonomy = v.value("use_taxonomy", cfg.use_taxonomy);
    if (v.contains("aggregation")) {
      cfg.aggregation = aggregation_from_string(v.at("aggregation").get<std::string>());
    }
    if (v.contains("injection")) {
      cfg.injection = injection_mode_from_string(v.at("injection").get<std::string>());
    }
    cfg.score_aux = v.value("score_aux", cfg.score_aux);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    cfg.lambda_cls = l.value("lambda_cls", cfg.lambda_cls);
    cfg.lambda_taxo = l.value("lambda_taxo", cfg.lambda_taxo);
    cfg.lambda_bce = l.value("lambda_bce", cfg.lambda_bce);
    cfg.lambda_dice = l.value("lambda_dice", cfg.lambda_dice);
    cfg.null_weight = l.value("null_weight", cfg.null_weight);
    cfg.union_softmax = l.value("union_softmax", cfg.union_softmax);
  }
  cfg.datasets.clear();
  for (const auto& d : j.value("datasets", ordered_json::array())) {
    if (d.is_string()) {
      cfg.datasets.push_back(stock_spec(d.get<std::string>()));
    } else {
      cfg.datasets.push_back(spec_from_json(d.dump()));
    }
  }
  cfg.ratios.clear();
  for (const auto& r : j.value("ratios", ordered_json::array())) {
    cfg.ratios.emplace_back(r.at(0).get<std::string>(), r.at(1).get<double>());
  }
  cfg.val_clips = j.value("val_clips", cfg.val_clips);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    cfg.step_size = o.value("step_size", cfg.step_size);
    cfg.iterations = o.value("iterations", cfg.iterations);
    cfg.eval_every = o.value("eval_every", cfg.eval_every);
  }
  cfg.seed = j.value("seed", cfg.seed);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = config_from_json(buf.str());
  if (const char* env = std::getenv("TAXOVIS_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  return cfg;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(config_to_json(cfg)); }

void validate(const RunConfig& cfg) {
  if (cfg.n_queries < 1 || cfg.C < 1 || cfg.D < 1 || cfg.layers < 1 || cfg.heads < 1) {
    throw std::invalid_argument("config: model dims must be positive");
  }
  if (cfg.C % cfg.heads != 0 || cfg.D % cfg.heads != 0) {
    throw std::invalid_argument("config: widths must divide by head count");
  }
  if (cfg.n_t < 1) throw std::invalid_argument("config: n_t must be positive");
  if (cfg.d_mid >= cfg.d_text) {
    throw std::invalid_argument("config: d_mid must be smaller than d_text");
  }
  if (cfg.lambda_cls < 0 || cfg.lambda_taxo < 0 || cfg.lambda_bce < 0 ||
      cfg.lambda_dice < 0 || cfg.null_weight < 0) {
    throw std::invalid_argument("config: loss weights must be non-negative");
  }
  if (cfg.datasets.empty()) throw std::invalid_argument("config: no datasets");
  for (const auto& [id, r] : cfg.ratios) {
    bool found = false;
    for (const SyntheticDatasetSpec& d : cfg.datasets) found |= d.dataset_id == id;
    if (!found) throw std::invalid_argument("config: ratio references unknown dataset " + id);
    if (r < 0) throw std::invalid_argument("config: negative ratio for " + id);
  }
  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    if (cfg.val_clips >= d.clip_count) {
      throw std::invalid_argument("config: val_clips leaves no training clips for " +
                                  d.dataset_id);
    }
  }
  if (cfg.iterations < 0 || cfg.step_size <= 0) {
    throw std::invalid_argument("config: bad optimizer settings");
  }
}

RunConfig preset(const std::string& name) {
  RunConfig cfg;
  cfg.n_queries = 12;
  cfg.C = 32;
  cfg.D = 32;
  cfg.layers = 3;
  cfg.heads = 4;
  cfg.n_t = 10;
  cfg.d_text = 24;
  cfg.d_mid = 6;
  cfg.d_mask = 16;
  cfg.ffn_hidden = 64;
  cfg.datasets = {stock_spec("syntha"), stock_spec("synthb"), stock_spec("synthc")};
  cfg.ratios = {{"syntha", 1.0}, {"synthb", 1.0}, {"synthc", 0.75}};
  cfg.val_clips = 16;
  cfg.iterations = 600;
  cfg.seed = 7;
  if (name == "baseline-tiny") {
    cfg.use_taxonomy = false;
    cfg.lambda_taxo = 0.0;
    cfg.score_aux = false;
  } else if (name == "tmt-tiny") {
    cfg.use_taxonomy = true;
    cfg.lambda_taxo = 0.5;
    cfg.score_aux = true;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  validate(cfg);
  return cfg;
}

}  // namespace taxovis
