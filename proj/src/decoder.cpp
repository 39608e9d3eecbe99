#include "taxovis/decoder.hpp"

#include <stdexcept>

namespace taxovis {

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "cross-attention") return Aggregation::kCrossAttention;
  if (s == "add") return Aggregation::kAdd;
  if (s == "concat") return Aggregation::kConcat;
  throw std::invalid_argument("unknown aggregation '" + s + "'");
}

InjectionMode injection_mode_from_string(const std::string& s) {
  if (s == "per-layer") return InjectionMode::kPerLayer;
  if (s == "first-layer-only") return InjectionMode::kFirstLayerOnly;
  throw std::invalid_argument("unknown injection mode '" + s + "'");
}

const char* name(Aggregation a) {
  switch (a) {
    case Aggregation::kCrossAttention: return "cross-attention";
    case Aggregation::kAdd: return "add";
    case Aggregation::kConcat: return "concat";
  }
  return "?";
}

const char* name(InjectionMode m) {
  return m == InjectionMode::kPerLayer ? "per-layer" : "first-layer-only";
}

DecoderVars bind_decoder(Binder& bind, const std::string& prefix, int n_queries, int C,
                         int D, int Dm, int K, int layers, int heads, int ffn_hidden,
                         Activation act) {
  DecoderVars v;
  v.act = act;
  v.heads = heads;
  v.query_table = bind(prefix + ".query_table", n_queries, C, Init::kStdNormal);
  v.query_pos = bind(prefix + ".query_pos", n_queries, C, Init::kStdNormal);
  v.proj_et = bind_linear(bind, prefix + ".proj_et", D, C);
  for (int l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    DecoderLayerVars lv;
    lv.inject = bind_attn_block(bind, lp + ".inject", C, C, heads);
    lv.inject_ffn = bind_ffn(bind, lp + ".inject_ffn", C, ffn_hidden, act);
    lv.feat = bind_attn_block(bind, lp + ".feat", C, D, heads);
    lv.self_attn = bind_attn_block(bind, lp + ".self", C, C, heads);
    lv.ffn = bind_ffn(bind, lp + ".ffn", C, ffn_hidden, act);
    v.layers.push_back(lv);
  }
  v.final_ln = bind_layer_norm(bind, prefix + ".final_ln", C);
  v.class_head = bind_linear(bind, prefix + ".class_head", C, K + 1);
  v.taxo_head = bind_linear(bind, prefix + ".taxo_head", C, K + 1);
  v.mask_fc1 = bind_linear(bind, prefix + ".mask_fc1", C, C);
  v.mask_fc2 = bind_linear(bind, prefix + ".mask_fc2", C, C);
  v.mask_fc3 = bind_linear(bind, prefix + ".mask_fc3", C, Dm);
  return v;
}

Var tim_inject(Var X_prev, Var E_T, const DecoderVars& v, const DecoderLayerVars& layer) {
  Var ctx = linear(E_T, v.proj_et);
  Var x = attention_block(X_prev, ctx, layer.inject, v.query_pos);
  return ffn_block(x, layer.inject_ffn);
}

Var decoder_layer(Var X_prime, Var F, const DecoderVars& v, const DecoderLayerVars& layer) {
  Var x = attention_block(X_prime, F, layer.feat, v.query_pos);
  x = self_attention_block(x, layer.self_attn, v.query_pos);
  return ffn_block(x, layer.ffn);
}

Var mask_head(Var queries, Var pixel, const DecoderVars& v) {
  Var h = ad::activation(linear(queries, v.mask_fc1), v.act);
  h = ad::activation(linear(h, v.mask_fc2), v.act);
  Var emb = linear(h, v.mask_fc3);
  return ad::matmul_nt(emb, pixel);
}

namespace {

InstancePredictionSet run_stack(ad::Tape& tape, Var F, Var E_T, Var pixel,
                                const DecoderVars& v, const DecoderOptions& opts,
                                bool with_taxonomy) {
  const int N = static_cast<int>(val(v.query_table).rows());
  Var X = v.query_table;
  Var taxo_src;  // post-injection state of the first injecting layer
  std::vector<Var> taxo_layer_srcs;

  Var ctx;       // projected taxonomy rows, shared by add/concat paths
  Var pooled;    // 1 x C mean of ctx (add mode)
  if (with_taxonomy) {
    ctx = linear(E_T, v.proj_et);
    if (opts.aggregation == Aggregation::kAdd) pooled = ad::mean_rows(ctx);
  }

  for (size_t l = 0; l < v.layers.size(); ++l) {
    const DecoderLayerVars& layer = v.layers[l];
    const bool inject_here =
        with_taxonomy &&
        (opts.injection == InjectionMode::kPerLayer || l == 0);

    if (inject_here && opts.aggregation == Aggregation::kCrossAttention) {
      X = tim_inject(X, E_T, v, layer);
      if (!taxo_src.valid()) taxo_src = X;
      if (opts.taxo_deep_supervision) taxo_layer_srcs.push_back(X);
    } else if (inject_here && opts.aggregation == Aggregation::kAdd) {
      X = ad::add(X, ad::broadcast_row(pooled, N));
      if (!taxo_src.valid()) taxo_src = X;
      if (opts.taxo_deep_supervision) taxo_layer_srcs.push_back(X);
    }

    if (inject_here && opts.aggregation == Aggregation::kConcat) {
      // Taxonomy rows ride along as extra tokens for this layer's
      // self-attention only, then get dropped.
      X = attention_block(X, F, layer.feat, v.query_pos);
      const int nt = static_cast<int>(val(ctx).rows());
      const int C = static_cast<int>(val(ctx).cols());
      Var qpos_aug = ad::concat_rows(v.query_pos, ad::constant(tape, Matrix::Zero(nt, C)));
      Var aug = ad::concat_rows(X, ctx);
      aug = self_attention_block(aug, layer.self_attn, qpos_aug);
      std::vector<int> keep(static_cast<size_t>(N));
      for (int i = 0; i < N; ++i) keep[static_cast<size_t>(i)] = i;
      X = ad::gather_rows(aug, keep);
      if (!taxo_src.valid()) taxo_src = X;
      if (opts.taxo_deep_supervision) taxo_layer_srcs.push_back(X);
      X = ffn_block(X, layer.ffn);
    } else {
      X = decoder_layer(X, F, v, layer);
    }
  }

  InstancePredictionSet out;
  out.queries = ad::layer_norm_rows(X, v.final_ln.gamma, v.final_ln.beta);
  out.class_logits = linear(out.queries, v.class_head);
  out.mask_logits = mask_head(out.queries, pixel, v);
  if (with_taxonomy) {
    auto taxo_of = [&](Var src) {
      return linear(ad::layer_norm_rows(src, v.final_ln.gamma, v.final_ln.beta),
                    v.taxo_head);
    };
    out.taxo_logits = taxo_of(taxo_src);
    for (Var src : taxo_layer_srcs) out.taxo_logits_layers.push_back(taxo_of(src));
  }
  return out;
}

}  // namespace

InstancePredictionSet decoder_forward(ad::Tape& tape, Var F, Var E_T, Var pixel,
                                      const DecoderVars& v, const DecoderOptions& opts) {
  if (!E_T.valid()) throw std::invalid_argument("decoder_forward: E_T required");
  return run_stack(tape, F, E_T, pixel, v, opts, true);
}

InstancePredictionSet baseline_forward(ad::Tape& tape, Var F, Var pixel,
                                       const DecoderVars& v) {
  return run_stack(tape, F, Var{}, pixel, v, DecoderOptions{}, false);
}

}  // namespace taxovis
