#pragma once

#include <string>
#include <vector>

#include "taxovis/config.hpp"
#include "taxovis/decoder.hpp"
#include "taxovis/embedding.hpp"
#include "taxovis/evaluation.hpp"
#include "taxovis/featurizer.hpp"
#include "taxovis/matching.hpp"
#include "taxovis/taxonomy.hpp"

namespace taxovis {

// Frozen per-run context: the unified label space over the configured
// datasets, the seeded text-embedding table, and one mask per dataset.
struct ModelContext {
  TaxonomySpace space;
  TextEmbeddingTable text;
  std::vector<DatasetMask> masks;  // in dataset order

  const DatasetMask& mask_of(const std::string& dataset_id) const;
};

ModelContext make_context(const RunConfig& cfg);

// Every parameter group of the configured variant. Names are keyed only by
// (seed, name), so the shared groups of two variants start identical.
struct ModelVars {
  FeaturizerVars feat;
  AdapterVars adapter;
  TcmVars tcm;  // bound only when cfg.use_taxonomy
  DecoderVars decoder;
};

ModelVars bind_model(Binder& bind, const RunConfig& cfg, int K);

struct ClipForward {
  ClipFeatures feats;
  Var E1;
  CompiledTaxonomy taxo;  // populated only when cfg.use_taxonomy
  InstancePredictionSet preds;
};

ClipForward model_forward(ad::Tape& tape, const RunConfig& cfg, const ModelContext& ctx,
                          const ModelVars& vars, const VideoClip& clip);

// Ground truth of a clip lifted into the unified space at mask resolution.
std::vector<GtTrack> gt_tracks(const VideoClip& clip, const TaxonomySpace& space);

// Full training loss of one clip: Hungarian assignment on the detached
// prediction values, then the supervised objective under the clip's dataset
// mask, plus clip-level presence supervision on the selector scores when
// configured.
struct ClipLoss {
  LossBreakdown breakdown;
  MatchAssignment assign;
  Var total;
  double total_value = 0.0;
};

ClipLoss clip_loss(ad::Tape& tape, const RunConfig& cfg, const ModelContext& ctx,
                   const ClipForward& fwd, const VideoClip& clip);

// Inference: per query, the best allowed category's softmax probability times
// the mean sigmoid confidence over predicted-foreground pixels; queries with
// empty masks are dropped and the top_k best scores survive.
std::vector<PredictedTrack> predict_tracks(const InstancePredictionSet& preds,
                                           const DatasetMask& dmask, int top_k = 10);

}  // namespace taxovis
