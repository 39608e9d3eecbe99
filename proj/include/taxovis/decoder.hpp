#pragma once

#include <string>
#include <vector>

#include "taxovis/blocks.hpp"
#include "taxovis/featurizer.hpp"
#include "taxovis/tcm.hpp"

namespace taxovis {

// How taxonomy embeddings reach the queries, and in which layers.
enum class Aggregation { kCrossAttention, kAdd, kConcat };
enum class InjectionMode { kPerLayer, kFirstLayerOnly };

Aggregation aggregation_from_string(const std::string& s);
InjectionMode injection_mode_from_string(const std::string& s);
const char* name(Aggregation a);
const char* name(InjectionMode m);

struct DecoderLayerVars {
  AttnBlockVars inject;  // queries x projected taxonomy embeddings
  FfnVars inject_ffn;
  AttnBlockVars feat;    // queries x video features
  AttnBlockVars self_attn;
  FfnVars ffn;
};

struct DecoderVars {
  Var query_table;  // N x C learned initial queries
  Var query_pos;    // N x C learned query positions (added at attention time)
  LinearVars proj_et;  // D -> C alignment for taxonomy embeddings
  std::vector<DecoderLayerVars> layers;
  LayerNormVars final_ln;
  LinearVars class_head;  // C -> K+1 (last column = no-object)
  LinearVars taxo_head;   // C -> K+1, applied to the post-injection state
  LinearVars mask_fc1, mask_fc2, mask_fc3;  // C -> C -> C -> Dm
  Activation act = Activation::kGelu;
  int heads = 1;
};

DecoderVars bind_decoder(Binder& bind, const std::string& prefix, int n_queries, int C,
                         int D, int Dm, int K, int layers, int heads, int ffn_hidden,
                         Activation act);

struct InstancePredictionSet {
  Var class_logits;  // N x (K+1)
  Var taxo_logits;   // N x (K+1); unset for the baseline decoder
  Var mask_logits;   // N x (T*Hm*Wm)
  Var queries;       // N x C after the final norm
  std::vector<Var> taxo_logits_layers;  // filled when deep supervision is on
};

// Queries cross-attend to the projected taxonomy embeddings, then FFN.
Var tim_inject(Var X_prev, Var E_T, const DecoderVars& v, const DecoderLayerVars& layer);

// Cross-attention to features, self-attention, FFN, in that order.
Var decoder_layer(Var X_prime, Var F, const DecoderVars& v, const DecoderLayerVars& layer);

struct DecoderOptions {
  Aggregation aggregation = Aggregation::kCrossAttention;
  InjectionMode injection = InjectionMode::kPerLayer;
  bool taxo_deep_supervision = false;
};

InstancePredictionSet decoder_forward(ad::Tape& tape, Var F, Var E_T, Var pixel,
                                      const DecoderVars& v, const DecoderOptions& opts);

// The same stack without any taxonomy pathway; shares every other parameter
// by name, so zeroed injection weights reduce the full model to this exactly.
InstancePredictionSet baseline_forward(ad::Tape& tape, Var F, Var pixel,
                                       const DecoderVars& v);

// mask_logits[q, p] = mask_embedding(query_q) . pixel_features[p]
Var mask_head(Var queries, Var pixel, const DecoderVars& v);

}  // namespace taxovis
