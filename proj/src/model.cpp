#include "taxovis/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace taxovis {

const DatasetMask& ModelContext::mask_of(const std::string& dataset_id) const {
  for (const DatasetMask& m : masks) {
    if (m.dataset_id == dataset_id) return m;
  }
  throw std::invalid_argument("no mask for dataset " + dataset_id);
}

ModelContext make_context(const RunConfig& cfg) {
  LabelLists lists;
  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    lists.emplace_back(d.dataset_id, d.categories);
  }
  ModelContext ctx;
  ctx.space = build_space(lists);
  ctx.text = embed_categories(ctx.space, cfg.d_text, cfg.seed);
  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    ctx.masks.push_back(dataset_mask(ctx.space, d.dataset_id));
  }
  return ctx;
}

ModelVars bind_model(Binder& bind, const RunConfig& cfg, int K) {
  ModelVars v;
  v.feat = bind_featurizer(bind, "feat", cfg.D, cfg.d_mask);
  if (cfg.use_taxonomy) {
    v.adapter = bind_adapter(bind, "adapter", cfg.d_text, cfg.d_mid, cfg.D, Activation::kGelu);
    v.tcm = bind_tcm(bind, "tcm", cfg.D, cfg.ffn_hidden, cfg.heads, Activation::kGelu);
  }
  v.decoder = bind_decoder(bind, "decoder", cfg.n_queries, cfg.C, cfg.D, cfg.d_mask, K,
                           cfg.layers, cfg.heads, cfg.ffn_hidden, Activation::kGelu);
  return v;
}

ClipForward model_forward(ad::Tape& tape, const RunConfig& cfg, const ModelContext& ctx,
                          const ModelVars& vars, const VideoClip& clip) {
  ClipForward out;
  out.feats = featurize(tape, clip, vars.feat);
  if (cfg.use_taxonomy) {
    Var table = ad::constant(tape, ctx.text.matrix);
    out.E1 = adapter_forward(table, vars.adapter);
    const int n_t = std::min(cfg.n_t, ctx.space.K());
    out.taxo = tcm_forward(out.E1, out.feats.F, vars.tcm, n_t);
    DecoderOptions opts;
    opts.aggregation = cfg.aggregation;
    opts.injection = cfg.injection;
    out.preds =
        decoder_forward(tape, out.feats.F, out.taxo.E_T, out.feats.pixel, vars.decoder, opts);
  } else {
    out.preds = baseline_forward(tape, out.feats.F, out.feats.pixel, vars.decoder);
  }
  return out;
}

std::vector<GtTrack> gt_tracks(const VideoClip& clip, const TaxonomySpace& space) {
  std::vector<GtTrack> out;
  for (const TrackData& t : clip.tracks) {
    const int id = space.id_of(t.category_name);
    if (id < 0) {
      throw std::runtime_error("clip " + clip.clip_id + ": category " + t.category_name +
                               " missing from the label space");
    }
    Matrix mask(1, static_cast<int>(t.masks.size()));
    for (size_t i = 0; i < t.masks.size(); ++i) {
      mask(0, static_cast<int>(i)) = t.masks[i] ? 1.0 : 0.0;
    }
    out.push_back({id, std::move(mask)});
  }
  return out;
}

ClipLoss clip_loss(ad::Tape& tape, const RunConfig& cfg, const ModelContext& ctx,
                   const ClipForward& fwd, const VideoClip& clip) {
  const DatasetMask* dm = cfg.union_softmax ? nullptr : &ctx.mask_of(clip.dataset_id);
  const std::vector<GtTrack> tracks = gt_tracks(clip, ctx.space);
  LossWeights w;
  w.lambda_cls = cfg.lambda_cls;
  w.lambda_taxo = cfg.lambda_taxo;
  w.lambda_bce = cfg.lambda_bce;
  w.lambda_dice = cfg.lambda_dice;
  w.null_weight = cfg.null_weight;

  ClipLoss out;
  const Matrix cost = build_cost_matrix(val(fwd.preds.class_logits),
                                        val(fwd.preds.mask_logits), tracks, dm, w);
  out.assign = hungarian_match(cost);
  out.breakdown = total_loss(tape, fwd.preds, tracks, out.assign, dm, w);
  out.total = out.breakdown.total;
  if (cfg.use_taxonomy && cfg.score_aux) {
    std::set<int> present;
    for (const GtTrack& t : tracks) present.insert(t.category);
    const std::vector<int> cats(present.begin(), present.end());
    out.total = ad::add(out.total, score_aux_loss(tape, fwd.taxo.S_logits, cats));
  }
  out.total_value = val(out.total)(0, 0);
  return out;
}

std::vector<PredictedTrack> predict_tracks(const InstancePredictionSet& preds,
                                           const DatasetMask& dmask, int top_k) {
  const Matrix& cls = val(preds.class_logits);
  const Matrix& mask = val(preds.mask_logits);
  const int n = static_cast<int>(cls.rows());
  const int cols = static_cast<int>(cls.cols());
  if (static_cast<int>(dmask.mask.size()) != cols - 1) {
    throw std::invalid_argument("predict_tracks: mask size does not match class count");
  }
  std::vector<PredictedTrack> out;
  for (int q = 0; q < n; ++q) {
    double mx = cls(q, cols - 1);
    for (int k = 0; k + 1 < cols; ++k) {
      if (dmask.mask[static_cast<size_t>(k)]) mx = std::max(mx, cls(q, k));
    }
    double denom = std::exp(cls(q, cols - 1) - mx);
    int best = -1;
    double best_logit = 0.0;
    for (int k = 0; k + 1 < cols; ++k) {
      if (!dmask.mask[static_cast<size_t>(k)]) continue;
      denom += std::exp(cls(q, k) - mx);
      if (best < 0 || cls(q, k) > best_logit) {
        best = k;
        best_logit = cls(q, k);
      }
    }
    if (best < 0) continue;  // dataset annotates nothing
    const double p_cls = std::exp(best_logit - mx) / denom;

    PredictedTrack track;
    track.category = best;
    track.masks.resize(static_cast<size_t>(mask.cols()));
    double conf_sum = 0.0;
    int conf_n = 0;
    for (int p = 0; p < mask.cols(); ++p) {
      const double s = 1.0 / (1.0 + std::exp(-mask(q, p)));
      const bool fg = s > 0.5;
      track.masks[static_cast<size_t>(p)] = fg ? 1 : 0;
      if (fg) {
        conf_sum += s;
        ++conf_n;
      }
    }
    if (conf_n == 0) continue;  // nothing segmented
    track.score = p_cls * (conf_sum / conf_n);
    out.push_back(std::move(track));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PredictedTrack& a, const PredictedTrack& b) {
                     return a.score > b.score;  // ties keep query order
                   });
  if (static_cast<int>(out.size()) > top_k) out.resize(static_cast<size_t>(top_k));
  return out;
}

}  // namespace taxovis
