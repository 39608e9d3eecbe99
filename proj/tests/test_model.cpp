#include "taxovis/model.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using namespace taxovis;

namespace {

RunConfig tiny_config(bool use_taxonomy) {
  RunConfig cfg;
  cfg.n_queries = 6;
  cfg.C = 16;
  cfg.D = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.n_t = 4;
  cfg.d_text = 8;
  cfg.d_mid = 4;
  cfg.d_mask = 8;
  cfg.ffn_hidden = 24;
  cfg.use_taxonomy = use_taxonomy;
  cfg.lambda_taxo = use_taxonomy ? 0.5 : 0.0;
  SyntheticDatasetSpec a = stock_spec("syntha");
  a.clip_count = 4;
  a.T = 3;
  a.H = a.W = 32;
  SyntheticDatasetSpec b = stock_spec("synthb");
  b.clip_count = 4;
  b.T = 3;
  b.H = b.W = 32;
  cfg.datasets = {a, b};
  cfg.ratios = {{"syntha", 1.0}, {"synthb", 1.0}};
  cfg.val_clips = 2;
  cfg.iterations = 2;
  cfg.seed = 11;
  return cfg;
}

void zero_injection_params(ParamStore& store, const RunConfig& cfg) {
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l);
    store.value(p + ".inject.attn.o.W").setZero();
    store.value(p + ".inject.attn.o.b").setZero();
    store.value(p + ".inject_ffn.fc2.W").setZero();
    store.value(p + ".inject_ffn.fc2.b").setZero();
  }
}

}  // namespace

TEST_CASE("context unifies the label spaces") {
  const RunConfig cfg = tiny_config(true);
  const ModelContext ctx = make_context(cfg);
  const int K = ctx.space.K();
  CHECK(K > 10);  // strictly more than one dataset's categories
  CHECK(K <= 18);
  CHECK(ctx.text.matrix.rows() == K);
  CHECK(ctx.text.matrix.cols() == cfg.d_text);
  REQUIRE(ctx.masks.size() == 2);
  CHECK(ctx.masks[0].popcount() == 10);
  CHECK(ctx.masks[1].popcount() == 8);
  CHECK(ctx.mask_of("synthb").dataset_id == "synthb");
  CHECK_THROWS_AS(ctx.mask_of("ghost"), std::invalid_argument);
}

TEST_CASE("ground truth lifts into the union space") {
  const RunConfig cfg = tiny_config(true);
  const ModelContext ctx = make_context(cfg);
  const VideoClip clip = gen_clip(cfg.datasets[1], 0);
  const std::vector<GtTrack> tracks = gt_tracks(clip, ctx.space);
  REQUIRE(tracks.size() == clip.tracks.size());
  for (size_t i = 0; i < tracks.size(); ++i) {
    CHECK(tracks[i].category == ctx.space.id_of(clip.tracks[i].category_name));
    CHECK(ctx.masks[1].mask[static_cast<size_t>(tracks[i].category)]);
    double sum = 0;
    for (uint8_t v : clip.tracks[i].masks) sum += v;
    CHECK(tracks[i].mask.sum() == sum);
    CHECK(tracks[i].mask.cols() == clip.T * clip.Hm * clip.Wm);
  }
  VideoClip alien = clip;
  alien.tracks[0].category_name = "unicorn";
  CHECK_THROWS_AS(gt_tracks(alien, ctx.space), std::runtime_error);
}

TEST_CASE("forward shapes and dispatch") {
  const RunConfig cfg = tiny_config(true);
  const ModelContext ctx = make_context(cfg);
  const VideoClip clip = gen_clip(cfg.datasets[0], 1);
  ParamStore store(cfg.seed);
  ad::Tape tape;
  Binder bind(tape, store);
  const ModelVars vars = bind_model(bind, cfg, ctx.space.K());
  const ClipForward fwd = model_forward(tape, cfg, ctx, vars, clip);

  const int K = ctx.space.K();
  CHECK(val(fwd.preds.class_logits).rows() == cfg.n_queries);
  CHECK(val(fwd.preds.class_logits).cols() == K + 1);
  CHECK(val(fwd.preds.taxo_logits).cols() == K + 1);
  CHECK(val(fwd.preds.mask_logits).cols() == clip.T * clip.Hm * clip.Wm);
  CHECK(val(fwd.taxo.E_T).rows() == cfg.n_t);
  CHECK(val(fwd.E1).rows() == K);
  CHECK(val(fwd.E1).cols() == cfg.D);

  const RunConfig base = tiny_config(false);
  ParamStore store2(base.seed);
  ad::Tape tape2;
  Binder bind2(tape2, store2);
  const ModelVars vars2 = bind_model(bind2, base, ctx.space.K());
  const ClipForward fwd2 = model_forward(tape2, base, ctx, vars2, clip);
  CHECK_FALSE(fwd2.preds.taxo_logits.valid());
  CHECK_FALSE(store2.has("tcm.xattn1.attn.q.W"));
  CHECK(store2.has("decoder.layer0.feat.attn.q.W"));
}

TEST_CASE("zeroed injection reduces the full model to the baseline") {
  const RunConfig tmt = tiny_config(true);
  const RunConfig base = tiny_config(false);
  const ModelContext ctx = make_context(tmt);

  ParamStore store_tmt(tmt.seed);
  {
    ad::Tape tape;
    Binder bind(tape, store_tmt);
    bind_model(bind, tmt, ctx.space.K());
  }
  zero_injection_params(store_tmt, tmt);

  ParamStore store_base(base.seed);

  for (int i = 0; i < 3; ++i) {
    const VideoClip clip = gen_clip(tmt.datasets[i % 2], i);
    ad::Tape tape_a;
    Binder bind_a(tape_a, store_tmt);
    const ModelVars vars_a = bind_model(bind_a, tmt, ctx.space.K());
    const ClipForward fa = model_forward(tape_a, tmt, ctx, vars_a, clip);

    ad::Tape tape_b;
    Binder bind_b(tape_b, store_base);
    const ModelVars vars_b = bind_model(bind_b, base, ctx.space.K());
    const ClipForward fb = model_forward(tape_b, base, ctx, vars_b, clip);

    CHECK(val(fa.preds.class_logits) == val(fb.preds.class_logits));
    CHECK(val(fa.preds.mask_logits) == val(fb.preds.mask_logits));
    CHECK(val(fa.preds.queries) == val(fb.preds.queries));
  }
}

TEST_CASE("clip loss composes the weighted objective") {
  RunConfig cfg = tiny_config(true);
  cfg.score_aux = false;
  const ModelContext ctx = make_context(cfg);
  const VideoClip clip = gen_clip(cfg.datasets[0], 2);
  ParamStore store(cfg.seed);
  ad::Tape tape;
  Binder bind(tape, store);
  const ModelVars vars = bind_model(bind, cfg, ctx.space.K());
  const ClipForward fwd = model_forward(tape, cfg, ctx, vars, clip);
  const ClipLoss loss = clip_loss(tape, cfg, ctx, fwd, clip);

  CHECK(std::isfinite(loss.total_value));
  CHECK(loss.total_value ==
        doctest::Approx(loss.breakdown.l_mask + cfg.lambda_cls * loss.breakdown.l_cls +
                        cfg.lambda_taxo * loss.breakdown.l_taxo)
            .epsilon(1e-12));
  CHECK(loss.assign.pairs.size() == clip.tracks.size());
  for (const auto& [q, t] : loss.assign.pairs) {
    CHECK(q >= 0);
    CHECK(q < cfg.n_queries);
  }

  // The auxiliary score term only moves the total, never the breakdown.
  RunConfig aux_cfg = cfg;
  aux_cfg.score_aux = true;
  ad::Tape tape2;
  ParamStore store2(cfg.seed);
  Binder bind2(tape2, store2);
  const ModelVars vars2 = bind_model(bind2, aux_cfg, ctx.space.K());
  const ClipForward fwd2 = model_forward(tape2, aux_cfg, ctx, vars2, clip);
  const ClipLoss loss2 = clip_loss(tape2, aux_cfg, ctx, fwd2, clip);
  CHECK(loss2.breakdown.total_value == doctest::Approx(loss.breakdown.total_value));
  CHECK(loss2.total_value > loss2.breakdown.total_value);  // bce of fresh scores
}

TEST_CASE("union softmax drops the per-dataset loss mask") {
  RunConfig masked = tiny_config(false);
  masked.score_aux = false;
  RunConfig unioned = masked;
  unioned.union_softmax = true;
  const ModelContext ctx = make_context(masked);
  const VideoClip clip = gen_clip(masked.datasets[0], 2);

  auto loss_value = [&](const RunConfig& cfg) {
    ParamStore store(cfg.seed);
    ad::Tape tape;
    Binder bind(tape, store);
    const ModelVars vars = bind_model(bind, cfg, ctx.space.K());
    const ClipForward fwd = model_forward(tape, cfg, ctx, vars, clip);
    return clip_loss(tape, cfg, ctx, fwd, clip).total_value;
  };

  // With a second dataset in the space, its categories join the softmax
  // denominators only under the union flag.
  CHECK(loss_value(masked) != loss_value(unioned));

  // With a single dataset the mask covers everything, so the flag is inert.
  RunConfig solo = masked;
  solo.datasets = {masked.datasets[0]};
  solo.ratios = {{"syntha", 1.0}};
  RunConfig solo_union = solo;
  solo_union.union_softmax = true;
  const ModelContext solo_ctx = make_context(solo);
  auto solo_loss = [&](const RunConfig& cfg) {
    ParamStore store(cfg.seed);
    ad::Tape tape;
    Binder bind(tape, store);
    const ModelVars vars = bind_model(bind, cfg, solo_ctx.space.K());
    const ClipForward fwd = model_forward(tape, cfg, solo_ctx, vars, clip);
    return clip_loss(tape, cfg, solo_ctx, fwd, clip).total_value;
  };
  CHECK(solo_loss(solo) == solo_loss(solo_union));
}

TEST_CASE("predict tracks scores and filters queries") {
  ad::Tape tape;
  // 3 queries, K=3 (+ null), 4 mask cells.
  Matrix cls(3, 4);
  cls << 9, 0, 0, 0,   // confident cat0
      0, 0, 7, 0,      // cat2, clearly weaker
      0, 0, 0, 9;      // confident null
  Matrix mask(3, 4);
  mask << 3, 3, -3, -3,   // two foreground cells
      -3, -3, -3, 3,      // one foreground cell
      -3, -3, -3, -3;     // empty mask -> dropped
  InstancePredictionSet preds;
  preds.class_logits = tape.input(cls, false);
  preds.mask_logits = tape.input(mask, false);

  DatasetMask dm{"ds", {true, true, true}};
  const std::vector<PredictedTrack> tracks = predict_tracks(preds, dm, 10);
  REQUIRE(tracks.size() == 2);

  const double p_hi = std::exp(9.0) / (std::exp(9.0) + 3.0);  // softmax over 4 logits
  const double sig3 = 1.0 / (1.0 + std::exp(-3.0));
  CHECK(tracks[0].category == 0);
  CHECK(tracks[0].score == doctest::Approx(p_hi * sig3).epsilon(1e-12));
  CHECK(tracks[0].masks == std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(tracks[1].category == 2);
  CHECK(tracks[1].score == doctest::Approx(std::exp(7.0) / (std::exp(7.0) + 3.0) * sig3)
                               .epsilon(1e-12));
  const std::vector<PredictedTrack> top1 = predict_tracks(preds, dm, 1);
  CHECK(top1.size() == 1);
  CHECK(top1[0].category == 0);

  // Masking category 0 rules it out as a label; query 0 falls back to the
  // uniform remainder (first of the tied categories).
  DatasetMask partial{"ds", {false, true, true}};
  const std::vector<PredictedTrack> masked = predict_tracks(preds, partial, 10);
  REQUIRE(masked.size() == 2);
  CHECK(masked[0].category == 2);
  CHECK(masked[1].category == 1);
  CHECK(masked[1].score == doctest::Approx(sig3 / 3.0).epsilon(1e-12));
}
