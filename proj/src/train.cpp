#include "taxovis/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxovis {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<const Corpus*> schedule_corpora(const std::vector<Corpus>& train,
                                            const std::vector<std::pair<std::string, double>>& ratios) {
  std::vector<const Corpus*> out;
  for (const auto& [id, r] : ratios) {
    const Corpus* found = nullptr;
    for (const Corpus& c : train) {
      if (c.spec.dataset_id == id) found = &c;
    }
    if (!found) throw std::invalid_argument("schedule references unknown dataset " + id);
    out.push_back(found);
  }
  return out;
}

std::vector<int> allowed_categories(const DatasetMask& dm) {
  std::vector<int> out;
  for (size_t k = 0; k < dm.mask.size(); ++k) {
    if (dm.mask[k]) out.push_back(static_cast<int>(k));
  }
  return out;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      ctx_(make_context(cfg)),
      store_(cfg.seed),
      stream_([&] {
        validate(cfg);
        for (const SyntheticDatasetSpec& spec : cfg.datasets) {
          Corpus full = generate_corpus(spec);
          const int n_train = spec.clip_count - cfg.val_clips;
          Corpus tr{spec, {full.clips.begin(), full.clips.begin() + n_train}};
          Corpus va{spec, {full.clips.begin() + n_train, full.clips.end()}};
          train_.push_back(std::move(tr));
          val_.push_back(std::move(va));
        }
        return SampleStream({cfg.ratios, cfg.seed}, schedule_corpora(train_, cfg.ratios));
      }()) {
  // Materialize every parameter group up front so a 0-iteration checkpoint
  // already holds the full initialization.
  ad::Tape tape;
  Binder bind(tape, store_);
  bind_model(bind, cfg_, ctx_.space.K());
}

const Corpus& Trainer::train_split(const std::string& dataset_id) const {
  for (const Corpus& c : train_) {
    if (c.spec.dataset_id == dataset_id) return c;
  }
  throw std::invalid_argument("unknown dataset " + dataset_id);
}

const Corpus& Trainer::val_split(const std::string& dataset_id) const {
  for (const Corpus& c : val_) {
    if (c.spec.dataset_id == dataset_id) return c;
  }
  throw std::invalid_argument("unknown dataset " + dataset_id);
}

IterationLog Trainer::step() {
  const VideoClip& clip = stream_.next();
  ad::Tape tape;
  Binder bind(tape, store_);
  const ModelVars vars = bind_model(bind, cfg_, ctx_.space.K());
  IterationLog log;
  try {
    const ClipForward fwd = model_forward(tape, cfg_, ctx_, vars, clip);
    const ClipLoss loss = clip_loss(tape, cfg_, ctx_, fwd, clip);
    if (!std::isfinite(loss.total_value)) {
      throw std::runtime_error("non-finite total loss");
    }
    tape.backward(loss.total);
    ParamStore::AdamConfig adam;
    adam.step_size = cfg_.step_size;
    store_.adam_step(bind.grads(), adam);
    log.total = loss.total_value;
    log.l_mask = loss.breakdown.l_mask;
    log.l_cls = loss.breakdown.l_cls;
    log.l_taxo = loss.breakdown.l_taxo;
  } catch (const std::exception& e) {
    throw std::runtime_error("training aborted at iteration " + std::to_string(iter_ + 1) +
                             " on clip " + clip.clip_id + ": " + e.what());
  }
  ++iter_;
  log.iter = iter_;
  log.clip_id = clip.clip_id;
  return log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config_hash = config_hash(cfg_);
  ck.taxonomy_hash = space_hash(ctx_.space);
  ck.iteration = iter_;
  ck.config_json = config_to_json(cfg_);
  ck.space_json = space_to_json(ctx_.space);
  ck.store = store_;
  return ck;
}

EvalResult evaluate_split(const RunConfig& cfg, const ModelContext& ctx, ParamStore& store,
                          const Corpus& data) {
  const DatasetMask& dm = ctx.mask_of(data.spec.dataset_id);
  std::map<std::string, std::vector<PredictedTrack>> preds;
  std::map<std::string, std::vector<GtEvalTrack>> gts;
  for (const VideoClip& clip : data.clips) {
    ad::Tape tape;
    Binder bind(tape, store);
    const ModelVars vars = bind_model(bind, cfg, ctx.space.K());
    const ClipForward fwd = model_forward(tape, cfg, ctx, vars, clip);
    preds[clip.clip_id] = predict_tracks(fwd.preds, dm, 10);
    auto& gt = gts[clip.clip_id];
    for (const TrackData& t : clip.tracks) {
      const int id = ctx.space.id_of(t.category_name);
      if (id < 0) throw std::runtime_error("category outside the label space");
      gt.push_back({id, t.masks});
    }
  }
  return evaluate(preds, gts, allowed_categories(dm));
}

double tcm_recall(const RunConfig& cfg, const ModelContext& ctx, ParamStore& store,
                  const Corpus& data) {
  if (!cfg.use_taxonomy) throw std::logic_error("tcm_recall: taxonomy pathway disabled");
  int hits = 0, total = 0;
  for (const VideoClip& clip : data.clips) {
    if (clip.tracks.empty()) continue;
    ad::Tape tape;
    Binder bind(tape, store);
    const ModelVars vars = bind_model(bind, cfg, ctx.space.K());
    const ClipForward fwd = model_forward(tape, cfg, ctx, vars, clip);
    std::set<int> selected(fwd.taxo.selected.begin(), fwd.taxo.selected.end());
    std::set<int> present;
    for (const TrackData& t : clip.tracks) present.insert(ctx.space.id_of(t.category_name));
    for (int cat : present) {
      hits += selected.count(cat) > 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

TrainResult train(const RunConfig& cfg, const std::string& out_dir) {
  Trainer trainer(cfg);
  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.open(out_dir + "/metrics.jsonl");
    if (!metrics) throw std::runtime_error("cannot write metrics in " + out_dir);
  }

  TrainResult result;
  for (int i = 0; i < cfg.iterations; ++i) {
    IterationLog log = trainer.step();
    if (metrics.is_open()) {
      ordered_json j{{"iter", log.iter},     {"clip", log.clip_id},
                     {"total", log.total},   {"l_mask", log.l_mask},
                     {"l_cls", log.l_cls},   {"l_taxo", log.l_taxo}};
      metrics << j.dump() << "\n";
    }
    if (cfg.eval_every > 0 && log.iter % cfg.eval_every == 0) {
      for (const SyntheticDatasetSpec& d : cfg.datasets) {
        const EvalResult ev = evaluate_split(cfg, trainer.context(), trainer.store(),
                                             trainer.val_split(d.dataset_id));
        if (metrics.is_open()) {
          ordered_json j{{"iter", log.iter}, {"eval", d.dataset_id}, {"ap", ev.ap},
                         {"ap50", ev.ap50},  {"ar10", ev.ar10}};
          metrics << j.dump() << "\n";
        }
      }
    }
    result.history.push_back(std::move(log));
  }

  for (const SyntheticDatasetSpec& d : cfg.datasets) {
    result.final_eval[d.dataset_id] = evaluate_split(cfg, trainer.context(), trainer.store(),
                                                     trainer.val_split(d.dataset_id));
  }
  result.checkpoint = trainer.checkpoint();

  if (!out_dir.empty()) {
    std::ofstream(out_dir + "/config.json") << config_to_json(cfg);
    std::ofstream(out_dir + "/space.json") << space_to_json(trainer.context().space);
    ordered_json ev;
    for (const auto& [id, r] : result.final_eval) {
      ev[id] = {{"ap", r.ap},   {"ap50", r.ap50}, {"ap75", r.ap75},
                {"ar1", r.ar1}, {"ar10", r.ar10}};
      for (const auto& [cat, ap] : r.per_category_ap) {
        ev[id]["per_category_ap"][trainer.context().space.at(cat).name] = ap;
      }
    }
    std::ofstream(out_dir + "/final_eval.json") << ev.dump(2) << "\n";
    save_checkpoint(out_dir + "/checkpoint.bin", result.checkpoint);
  }
  return result;
}

namespace {

// Context rebuilt from a checkpoint's own dumps rather than from presets.
struct LoadedRun {
  RunConfig cfg;
  ModelContext ctx;
};

LoadedRun load_run(const Checkpoint& ck) {
  LoadedRun run;
  run.cfg = config_from_json(ck.config_json);
  run.ctx.space = space_from_json(ck.space_json);
  if (space_hash(run.ctx.space) != ck.taxonomy_hash) {
    throw std::runtime_error("checkpoint taxonomy dump does not match its hash");
  }
  run.ctx.text = embed_categories(run.ctx.space, run.cfg.d_text, run.cfg.seed);
  for (const SyntheticDatasetSpec& d : run.cfg.datasets) {
    run.ctx.masks.push_back(dataset_mask(run.ctx.space, d.dataset_id));
  }
  return run;
}

void check_corpus_in_space(const TaxonomySpace& space, const Corpus& data) {
  for (const std::string& name : data.spec.categories) {
    const int id = space.id_of(name);
    if (id < 0 || space.at(id).member_of.count(data.spec.dataset_id) == 0) {
      throw std::runtime_error("taxonomy space mismatch between checkpoint and corpus (" +
                               data.spec.dataset_id + "/" + name + ")");
    }
  }
}

}  // namespace

EvalResult evaluate_checkpoint(const Checkpoint& ck, const Corpus& data, bool zero_shot) {
  LoadedRun run = load_run(ck);
  check_corpus_in_space(run.ctx.space, data);
  if (zero_shot) {
    for (const auto& [id, r] : run.cfg.ratios) {
      if (id == data.spec.dataset_id && r > 0) {
        throw std::invalid_argument("dataset " + id +
                                    " was sampled during training; not zero-shot");
      }
    }
  }
  ParamStore store = ck.store;
  return evaluate_split(run.cfg, run.ctx, store, data);
}

double tcm_recall_checkpoint(const Checkpoint& ck, const Corpus& data) {
  LoadedRun run = load_run(ck);
  check_corpus_in_space(run.ctx.space, data);
  ParamStore store = ck.store;
  return tcm_recall(run.cfg, run.ctx, store, data);
}

}  // namespace taxovis
