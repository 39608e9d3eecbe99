#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taxovis/decoder.hpp"
#include "taxovis/synth.hpp"

namespace taxovis {

// One experiment, fully specified. The datasets listed here define the
// unified label space in order; `schedule` draws training clips from the
// subset with a positive ratio, so a dataset can contribute labels without
// contributing clips (the zero-shot setup).
struct RunConfig {
  // model dims
  int n_queries = 20;
  int C = 64;        // query width
  int D = 64;        // feature / embedding width
  int layers = 9;
  int heads = 4;
  int n_t = 10;      // taxonomy embeddings kept by the selector
  int d_text = 32;   // raw text-embedding width
  int d_mid = 8;     // adapter bottleneck width, d_text / 4
  int d_mask = 16;   // pixel-embedding width
  int ffn_hidden = 128;

  // variant switches
  bool use_taxonomy = true;
  Aggregation aggregation = Aggregation::kCrossAttention;
  InjectionMode injection = InjectionMode::kPerLayer;
  bool score_aux = false;  // clip-level presence supervision on selector scores

  // loss weights
  double lambda_cls = 2.0;
  double lambda_taxo = 0.5;
  double lambda_bce = 5.0;
  double lambda_dice = 5.0;
  double null_weight = 0.1;
  // Train classification terms over the full union label space instead of
  // masking each clip's loss to its dataset's categories. Off for the
  // taxonomy-aware variants; on it exposes joint training to cross-dataset
  // label conflicts (the dilution baseline).
  bool union_softmax = false;

  // data
  std::vector<SyntheticDatasetSpec> datasets;
  std::vector<std::pair<std::string, double>> ratios;  // dataset_id -> weight
  int val_clips = 16;  // trailing clips of each corpus held out

  // optimizer
  double step_size = 1e-3;
  int iterations = 200;
  int eval_every = 0;  // 0 = evaluate only at the end
  uint64_t seed = 7;
};

// JSON round-trip. Datasets may be given as stock names ("syntha") or full
// spec objects; serialization always writes full objects. schema_version is
// required and must be 1.
std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& json_text);

// File load; TAXOVIS_SEED in the environment overrides the config seed.
RunConfig load_config(const std::string& path);

// Hash of the canonical serialization; stamped into checkpoints.
uint64_t config_hash(const RunConfig& cfg);

// Ready-made tiny experiments: "baseline-tiny" (no taxonomy modules) and
// "tmt-tiny" (selector + injection + taxonomy loss + score supervision),
// both over the three stock corpora at ratios 1 : 1 : 0.75.
RunConfig preset(const std::string& name);

void validate(const RunConfig& cfg);

}  // namespace taxovis
