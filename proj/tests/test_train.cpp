#include "taxovis/train.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"

using namespace taxovis;

namespace {

SyntheticDatasetSpec micro_dataset(const std::string& id, std::vector<std::string> cats,
                                   uint64_t seed) {
  SyntheticDatasetSpec spec;
  spec.dataset_id = id;
  spec.categories = std::move(cats);
  spec.clip_count = 6;
  spec.T = 3;
  spec.H = spec.W = 32;
  spec.max_instances = 2;
  spec.seed = seed;
  return spec;
}

RunConfig micro_config() {
  RunConfig cfg;
  cfg.n_queries = 6;
  cfg.C = 16;
  cfg.D = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.n_t = 3;
  cfg.d_text = 8;
  cfg.d_mid = 4;
  cfg.d_mask = 8;
  cfg.ffn_hidden = 24;
  cfg.use_taxonomy = true;
  cfg.score_aux = true;
  cfg.datasets = {
      micro_dataset("alpha", {"disc_solid_small", "square_solid_small", "ring_solid_large"},
                    501),
      micro_dataset("beta", {"disc_solid_small", "bar_striped_large"}, 502)};
  cfg.ratios = {{"alpha", 1.0}, {"beta", 1.0}};
  cfg.val_clips = 2;
  cfg.iterations = 4;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("training is deterministic") {
  const RunConfig cfg = micro_config();
  Trainer a(cfg);
  Trainer b(cfg);
  for (int i = 0; i < 4; ++i) {
    const IterationLog la = a.step();
    const IterationLog lb = b.step();
    CHECK(la.clip_id == lb.clip_id);
    CHECK(la.total == lb.total);  // bitwise
    CHECK(la.l_mask == lb.l_mask);
    CHECK(la.l_cls == lb.l_cls);
  }
  const std::string dir = testutil::temp_dir("train_det");
  save_checkpoint(dir + "/a.bin", a.checkpoint());
  save_checkpoint(dir + "/b.bin", b.checkpoint());
  CHECK(file_hash(dir + "/a.bin") == file_hash(dir + "/b.bin"));
}

TEST_CASE("zero iterations preserve the initialization") {
  RunConfig cfg = micro_config();
  cfg.iterations = 0;
  const TrainResult result = train(cfg);
  CHECK(result.checkpoint.iteration == 0);
  CHECK(result.history.empty());

  ParamStore fresh(cfg.seed);
  const ModelContext ctx = make_context(cfg);
  ad::Tape tape;
  Binder bind(tape, fresh);
  bind_model(bind, cfg, ctx.space.K());
  REQUIRE(fresh.entries().size() == result.checkpoint.store.entries().size());
  for (const auto& [name, entry] : fresh.entries()) {
    CHECK(result.checkpoint.store.entries().at(name).value == entry.value);
  }
}

TEST_CASE("losses decrease on a micro run") {
  RunConfig cfg = micro_config();
  cfg.iterations = 60;
  const TrainResult result = train(cfg);
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) first += result.history[static_cast<size_t>(i)].total;
  for (int i = 50; i < 60; ++i) last += result.history[static_cast<size_t>(i)].total;
  CHECK(last < first);
}

TEST_CASE("the baseline variant binds no taxonomy parameters") {
  RunConfig off = micro_config();
  off.use_taxonomy = false;
  off.lambda_taxo = 0.0;
  off.score_aux = false;

  Trainer t(off);
  for (int i = 0; i < 2; ++i) {
    const IterationLog log = t.step();
    CHECK(log.l_taxo == 0.0);
  }
  for (const auto& [name, entry] : t.store().entries()) {
    CHECK(name.rfind("tcm.", 0) != 0);
    CHECK(name.rfind("adapter.", 0) != 0);
  }
}

TEST_CASE("non-finite losses abort with the clip id") {
  const RunConfig cfg = micro_config();
  Trainer t(cfg);
  t.store().value("decoder.class_head.W")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(t.step(),
                       doctest::Contains("training aborted at iteration 1 on clip "),
                       std::runtime_error);
}

TEST_CASE("train writes the run directory") {
  RunConfig cfg = micro_config();
  cfg.iterations = 2;
  cfg.eval_every = 1;
  const std::string dir = testutil::temp_dir("train_out") + "/run1";
  std::filesystem::remove_all(dir);
  const TrainResult result = train(cfg, dir);
  CHECK(std::filesystem::exists(dir + "/config.json"));
  CHECK(std::filesystem::exists(dir + "/space.json"));
  CHECK(std::filesystem::exists(dir + "/final_eval.json"));
  CHECK(std::filesystem::exists(dir + "/checkpoint.bin"));

  std::ifstream metrics(dir + "/metrics.jsonl");
  REQUIRE(metrics);
  int lines = 0;
  std::string line;
  while (std::getline(metrics, line)) ++lines;
  CHECK(lines == 2 + 2 * 2);  // per-iteration rows plus eval rows per dataset

  const Checkpoint ck = load_checkpoint(dir + "/checkpoint.bin");
  CHECK(ck.iteration == 2);
  CHECK(ck.config_hash == config_hash(cfg));
  CHECK(result.final_eval.count("alpha") == 1);
  CHECK(result.final_eval.count("beta") == 1);
}

TEST_CASE("checkpoint evaluation matches the in-process evaluation") {
  RunConfig cfg = micro_config();
  cfg.iterations = 3;
  Trainer t(cfg);
  for (int i = 0; i < 3; ++i) t.step();
  const EvalResult direct =
      evaluate_split(cfg, t.context(), t.store(), t.val_split("alpha"));

  const Checkpoint ck = t.checkpoint();
  const EvalResult via_ckpt = evaluate_checkpoint(ck, t.val_split("alpha"), false);
  CHECK(via_ckpt.ap == direct.ap);
  CHECK(via_ckpt.ap50 == direct.ap50);
  CHECK(via_ckpt.ar10 == direct.ar10);

  // Determinism of evaluation itself.
  const EvalResult again = evaluate_checkpoint(ck, t.val_split("alpha"), false);
  CHECK(again.ap == via_ckpt.ap);
}

TEST_CASE("zero-shot evaluation enforces the sampling exclusion") {
  RunConfig cfg = micro_config();
  cfg.ratios = {{"alpha", 1.0}, {"beta", 0.0}};
  cfg.iterations = 1;
  Trainer t(cfg);
  t.step();
  const Checkpoint ck = t.checkpoint();

  CHECK_NOTHROW(evaluate_checkpoint(ck, t.val_split("beta"), true));
  CHECK_THROWS_AS(evaluate_checkpoint(ck, t.val_split("alpha"), true),
                  std::invalid_argument);
  CHECK_NOTHROW(evaluate_checkpoint(ck, t.val_split("alpha"), false));
}

TEST_CASE("corpora outside the stored taxonomy are rejected") {
  RunConfig cfg = micro_config();
  cfg.iterations = 1;
  Trainer t(cfg);
  t.step();
  const Checkpoint ck = t.checkpoint();

  Corpus alien = t.val_split("alpha");
  alien.spec.categories.push_back("cross_dotted_large");
  CHECK_THROWS_AS(evaluate_checkpoint(ck, alien, false), std::runtime_error);

  Corpus renamed = t.val_split("alpha");
  renamed.spec.dataset_id = "gamma";
  CHECK_THROWS_AS(evaluate_checkpoint(ck, renamed, false), std::runtime_error);
}

TEST_CASE("selector recall is defined and bounded") {
  RunConfig cfg = micro_config();
  Trainer t(cfg);
  t.step();
  const double r = tcm_recall(cfg, t.context(), t.store(), t.val_split("alpha"));
  CHECK(r >= 0.0);
  CHECK(r <= 1.0);
  const double via_ckpt = tcm_recall_checkpoint(t.checkpoint(), t.val_split("alpha"));
  CHECK(via_ckpt == r);

  RunConfig off = cfg;
  off.use_taxonomy = false;
  Trainer t2(off);
  CHECK_THROWS_AS(tcm_recall(off, t2.context(), t2.store(), t2.val_split("alpha")),
                  std::logic_error);
}
