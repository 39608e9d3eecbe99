#pragma once

#include <map>
#include <string>
#include <vector>

#include "taxovis/checkpoint.hpp"
#include "taxovis/model.hpp"

namespace taxovis {

struct IterationLog {
  int iter = 0;
  std::string clip_id;
  double total = 0, l_mask = 0, l_cls = 0, l_taxo = 0;
};

// Single-threaded deterministic loop over the configured corpora. The last
// val_clips clips of every corpus are held out; the sampler only sees the
// training remainder. step() throws on a non-finite loss, naming the clip.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  IterationLog step();
  int iteration() const { return iter_; }

  const RunConfig& config() const { return cfg_; }
  const ModelContext& context() const { return ctx_; }
  ParamStore& store() { return store_; }
  const Corpus& train_split(const std::string& dataset_id) const;
  const Corpus& val_split(const std::string& dataset_id) const;

  Checkpoint checkpoint() const;

 private:
  RunConfig cfg_;
  ModelContext ctx_;
  ParamStore store_;
  std::vector<Corpus> train_;
  std::vector<Corpus> val_;
  SampleStream stream_;
  int iter_ = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<IterationLog> history;
  std::map<std::string, EvalResult> final_eval;  // per dataset, val split
};

// Runs cfg.iterations steps; with a non-empty out_dir also writes config.json,
// space.json, metrics.jsonl, final_eval.json and checkpoint.bin there.
TrainResult train(const RunConfig& cfg, const std::string& out_dir = "");

// Forward-only metrics of the current parameters on one corpus.
EvalResult evaluate_split(const RunConfig& cfg, const ModelContext& ctx, ParamStore& store,
                          const Corpus& data);

// Fraction of ground-truth categories that the selector's top-N_T contains,
// averaged over clips with at least one track.
double tcm_recall(const RunConfig& cfg, const ModelContext& ctx, ParamStore& store,
                  const Corpus& data);

// Checkpoint-level evaluation for the CLI: rebuilds config and label space
// from the checkpoint, validates the corpus against the stored taxonomy, and
// applies the dataset's label mask at inference. zero_shot additionally
// requires the dataset to have had no positive sampling ratio in training.
EvalResult evaluate_checkpoint(const Checkpoint& ck, const Corpus& data, bool zero_shot);

double tcm_recall_checkpoint(const Checkpoint& ck, const Corpus& data);

}  // namespace taxovis
