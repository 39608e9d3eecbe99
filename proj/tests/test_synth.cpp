#include "taxovis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "taxovis/taxonomy.hpp"

using namespace taxovis;

namespace {

// Mask pixel count of one track at frame t.
int mask_area(const VideoClip& clip, const TrackData& tr, int t) {
  int area = 0;
  for (int y = 0; y < clip.Hm; ++y)
    for (int x = 0; x < clip.Wm; ++x) area += VideoClip::mask_at(tr, t, y, x, clip.Hm, clip.Wm);
  return area;
}

// Independent rasterizer: count mask-grid samples inside the shape placed at
// (cx, cy), ignoring occlusion.
int analytic_area(const std::string& family, double cx, double cy, double r, int Hm,
                  int Wm) {
  int area = 0;
  for (int my = 0; my < Hm; ++my) {
    for (int mx = 0; mx < Wm; ++mx) {
      const double px = (mx + 0.5) * 4.0, py = (my + 0.5) * 4.0;
      if (point_in_shape(family, px - cx, py - cy, r)) ++area;
    }
  }
  return area;
}

bool frames_equal(const VideoClip& a, const VideoClip& b) {
  return a.frames == b.frames;
}

}  // namespace

TEST_CASE("archetype table covers all stock categories") {
  for (const char* name : {"syntha", "synthb", "synthc"}) {
    const SyntheticDatasetSpec spec = stock_spec(name);
    for (const std::string& cat : spec.categories) {
      const Archetype& a = archetype_for(cat);
      CHECK(a.r_min > 0);
      CHECK(a.r_max >= a.r_min);
    }
  }
  CHECK(known_archetype_names().size() == 22);
  CHECK_THROWS_AS(archetype_for("no_such_category"), std::invalid_argument);
  CHECK_THROWS_AS(stock_spec("synthd"), std::invalid_argument);
  CHECK(is_stock_spec("syntha"));
  CHECK(!is_stock_spec("ytvis"));
}

TEST_CASE("stock corpora overlap structure") {
  const SyntheticDatasetSpec a = stock_spec("syntha");
  const SyntheticDatasetSpec b = stock_spec("synthb");
  const SyntheticDatasetSpec c = stock_spec("synthc");
  CHECK(a.categories.size() == 10);
  CHECK(b.categories.size() == 8);
  CHECK(c.categories.size() == 12);

  auto overlap = [](const std::vector<std::string>& l, const std::vector<std::string>& r) {
    std::set<std::string> ls(l.begin(), l.end());
    int n = 0;
    for (const std::string& s : r) n += ls.count(s) ? 1 : 0;
    return n;
  };
  CHECK(overlap(a.categories, b.categories) == 5);
  CHECK(overlap(a.categories, c.categories) == 3);
  CHECK(overlap(b.categories, c.categories) == 0);

  // The union space the three corpora induce.
  LabelLists lists = {{"syntha", a.categories},
                      {"synthb", b.categories},
                      {"synthc", c.categories}};
  const TaxonomySpace space = build_space(lists, {});
  CHECK(space.K() == 22);
  CHECK(dataset_mask(space, "syntha").popcount() == 10);
  CHECK(dataset_mask(space, "synthb").popcount() == 8);
  CHECK(dataset_mask(space, "synthc").popcount() == 12);
}

TEST_CASE("point_in_shape basics") {
  CHECK(point_in_shape("disc", 0, 0, 5));
  CHECK(point_in_shape("disc", 5, 0, 5));
  CHECK(!point_in_shape("disc", 5.01, 0, 5));
  CHECK(!point_in_shape("disc", 4, 4, 5));
  CHECK(point_in_shape("square", 4, 4, 5));
  CHECK(!point_in_shape("diamond", 4, 4, 5));
  CHECK(point_in_shape("diamond", 2, 2, 5));
  CHECK(!point_in_shape("ring", 0, 0, 6));     // hole
  CHECK(point_in_shape("ring", 4.5, 0, 6));
  CHECK(point_in_shape("cross", 0, 5.5, 6));
  CHECK(!point_in_shape("cross", 4, 4, 6));
  CHECK(point_in_shape("ellipse", 5.9, 0, 6));
  CHECK(!point_in_shape("ellipse", 0, 5.9, 6));  // minor axis is 0.6 r
  CHECK(point_in_shape("bar", 5.9, 0, 6));
  CHECK(!point_in_shape("bar", 0, 3.0, 6));
  CHECK(point_in_shape("triangle", 0, -5.9, 6));  // apex up
  CHECK(!point_in_shape("triangle", 3, -5.0, 6));
  CHECK(point_in_shape("triangle", 3, 3, 6));
  CHECK_THROWS_AS(point_in_shape("blob", 0, 0, 5), std::invalid_argument);
}

TEST_CASE("static instance keeps an identical mask across frames") {
  InstanceParams p;
  p.category = "square_solid_small";
  p.r = 6;
  p.cx = 24.0;
  p.cy = 24.0;
  const VideoClip clip = render_clip({p}, "d", "c0", 4, 64, 64);
  REQUIRE(clip.tracks.size() == 1);
  const TrackData& tr = clip.tracks[0];
  const int a0 = mask_area(clip, tr, 0);
  CHECK(a0 > 0);
  for (int t = 1; t < clip.T; ++t) {
    for (int y = 0; y < clip.Hm; ++y)
      for (int x = 0; x < clip.Wm; ++x)
        CHECK(VideoClip::mask_at(tr, t, y, x, clip.Hm, clip.Wm) ==
              VideoClip::mask_at(tr, 0, y, x, clip.Hm, clip.Wm));
  }
  // And the RGB frames are bitwise static too.
  for (int t = 1; t < clip.T; ++t)
    for (int y = 0; y < clip.H; ++y)
      for (int x = 0; x < clip.W; ++x)
        for (int c = 0; c < 3; ++c) CHECK(clip.rgb(t, y, x, c) == clip.rgb(0, y, x, c));
}

TEST_CASE("mask areas match an independent analytic rasterizer") {
  // Moving instance, no occluders: every frame's mask must equal the analytic
  // sample count at the reflected center.
  for (const char* cat : {"disc_solid_large", "triangle_solid_large", "ring_solid_large",
                          "cross_dotted_large", "ellipse_dotted_large", "bar_dotted_large",
                          "diamond_dotted_large", "square_dotted_large"}) {
    InstanceParams p;
    p.category = cat;
    p.r = 11.0;
    p.cx = 20.0;
    p.cy = 30.0;
    p.vx = 3.5;
    p.vy = -2.0;
    const VideoClip clip = render_clip({p}, "d", "c0", 5, 64, 64);
    REQUIRE(clip.tracks.size() == 1);
    const Archetype& a = archetype_for(cat);
    const double lo = p.r + 2.0, hi = 64.0 - p.r - 2.0;
    for (int t = 0; t < clip.T; ++t) {
      double cx = p.cx + p.vx * t, cy = p.cy + p.vy * t;
      while (cx < lo || cx > hi) cx = cx < lo ? 2 * lo - cx : 2 * hi - cx;
      while (cy < lo || cy > hi) cy = cy < lo ? 2 * lo - cy : 2 * hi - cy;
      CHECK(mask_area(clip, clip.tracks[0], t) ==
            analytic_area(a.family, cx, cy, p.r, clip.Hm, clip.Wm));
    }
  }
}

TEST_CASE("full occlusion removes exactly the covered samples") {
  // Big square drawn after a small disc, same center: the disc keeps only
  // samples outside the square (none, since the square contains the disc).
  InstanceParams below;
  below.category = "disc_solid_small";
  below.r = 5.0;
  below.cx = 32.0;
  below.cy = 32.0;
  InstanceParams above;
  above.category = "square_dotted_large";
  above.r = 12.0;
  above.cx = 32.0;
  above.cy = 32.0;
  const VideoClip clip = render_clip({below, above}, "d", "c0", 2, 64, 64);
  // The fully hidden disc track is dropped; only the square survives.
  REQUIRE(clip.tracks.size() == 1);
  CHECK(clip.tracks[0].category_name == "square_dotted_large");

  // Partial occlusion: the visible part of the lower shape equals its
  // unoccluded support minus the overlap with the upper shape.
  above.cx = 44.0;
  const VideoClip clip2 = render_clip({below, above}, "d", "c1", 1, 64, 64);
  REQUIRE(clip2.tracks.size() == 2);
  int expect = 0;
  for (int my = 0; my < clip2.Hm; ++my) {
    for (int mx = 0; mx < clip2.Wm; ++mx) {
      const double px = (mx + 0.5) * 4.0, py = (my + 0.5) * 4.0;
      const bool in_disc = point_in_shape("disc", px - below.cx, py - below.cy, below.r);
      const bool in_square = point_in_shape("square", px - above.cx, py - above.cy, above.r);
      if (in_disc && !in_square) ++expect;
    }
  }
  CHECK(mask_area(clip2, clip2.tracks[0], 0) == expect);
}

TEST_CASE("masks partition occupied samples") {
  const SyntheticDatasetSpec spec = stock_spec("synthb");  // occlusion-heavy
  for (int idx : {0, 1, 2, 3, 4, 5, 6, 7}) {
    const VideoClip clip = gen_clip(spec, idx);
    for (int t = 0; t < clip.T; ++t) {
      for (int y = 0; y < clip.Hm; ++y) {
        for (int x = 0; x < clip.Wm; ++x) {
          int owners = 0;
          for (const TrackData& tr : clip.tracks)
            owners += VideoClip::mask_at(tr, t, y, x, clip.Hm, clip.Wm);
          CHECK(owners <= 1);  // no sample has two owners
        }
      }
    }
    // Every track that exists has at least one visible sample.
    for (const TrackData& tr : clip.tracks) {
      int total = 0;
      for (int t = 0; t < clip.T; ++t) total += mask_area(clip, tr, t);
      CHECK(total > 0);
    }
  }
}

TEST_CASE("instance counts and categories respect the spec") {
  const SyntheticDatasetSpec spec = stock_spec("synthb");
  for (int idx = 0; idx < 16; ++idx) {
    const VideoClip clip = gen_clip(spec, idx);
    CHECK(clip.tracks.size() <= static_cast<size_t>(spec.max_instances));
    for (const TrackData& tr : clip.tracks) {
      REQUIRE(tr.category_local >= 0);
      REQUIRE(tr.category_local < static_cast<int>(spec.categories.size()));
      CHECK(spec.categories[static_cast<size_t>(tr.category_local)] == tr.category_name);
    }
  }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  SyntheticDatasetSpec spec = stock_spec("syntha");
  spec.clip_count = 4;
  const Corpus c1 = generate_corpus(spec);
  const Corpus c2 = generate_corpus(spec);
  REQUIRE(c1.clips.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(frames_equal(c1.clips[i], c2.clips[i]));
    REQUIRE(c1.clips[i].tracks.size() == c2.clips[i].tracks.size());
    for (size_t k = 0; k < c1.clips[i].tracks.size(); ++k)
      CHECK(c1.clips[i].tracks[k].masks == c2.clips[i].tracks[k].masks);
  }
  // A different seed changes at least the first clip's pixels.
  spec.seed += 1;
  const Corpus c3 = generate_corpus(spec);
  CHECK(!frames_equal(c1.clips[0], c3.clips[0]));
  // Clip index keys the stream: clips differ from each other.
  CHECK(!frames_equal(c1.clips[0], c1.clips[1]));
}

TEST_CASE("spec json round-trip and hash") {
  SyntheticDatasetSpec spec = stock_spec("synthc");
  spec.clip_count = 17;
  spec.jitter = 0.25;
  const std::string text = spec_to_json(spec);
  const SyntheticDatasetSpec back = spec_from_json(text);
  CHECK(back.dataset_id == spec.dataset_id);
  CHECK(back.categories == spec.categories);
  CHECK(back.clip_count == 17);
  CHECK(back.jitter == 0.25);
  CHECK(back.seed == spec.seed);
  CHECK(spec_hash(back) == spec_hash(spec));
  SyntheticDatasetSpec other = spec;
  other.max_speed = 1.0;
  CHECK(spec_hash(other) != spec_hash(spec));
  CHECK_THROWS_AS(spec_from_json("{\"schema_version\": 2}"), std::invalid_argument);
}

TEST_CASE("corpus save/load round-trips bitwise") {
  SyntheticDatasetSpec spec = stock_spec("synthb");
  spec.clip_count = 3;
  const Corpus corpus = generate_corpus(spec);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "taxovis_synth_rt").string();
  std::filesystem::remove_all(dir);
  save_corpus(corpus, dir);
  const Corpus back = load_corpus(dir);
  CHECK(back.spec.dataset_id == spec.dataset_id);
  CHECK(spec_hash(back.spec) == spec_hash(spec));
  REQUIRE(back.clips.size() == corpus.clips.size());
  for (size_t i = 0; i < corpus.clips.size(); ++i) {
    CHECK(back.clips[i].clip_id == corpus.clips[i].clip_id);
    CHECK(frames_equal(back.clips[i], corpus.clips[i]));
    REQUIRE(back.clips[i].tracks.size() == corpus.clips[i].tracks.size());
    for (size_t k = 0; k < corpus.clips[i].tracks.size(); ++k) {
      CHECK(back.clips[i].tracks[k].category_local ==
            corpus.clips[i].tracks[k].category_local);
      CHECK(back.clips[i].tracks[k].category_name ==
            corpus.clips[i].tracks[k].category_name);
      CHECK(back.clips[i].tracks[k].masks == corpus.clips[i].tracks[k].masks);
    }
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_corpus(dir), std::runtime_error);
}

TEST_CASE("sample stream honors ratios") {
  SyntheticDatasetSpec sa = stock_spec("syntha");
  SyntheticDatasetSpec sb = stock_spec("synthb");
  SyntheticDatasetSpec sc = stock_spec("synthc");
  sa.clip_count = sb.clip_count = sc.clip_count = 4;
  // Tiny frames keep generation cheap; geometry is irrelevant here.
  sa.H = sa.W = sb.H = sb.W = sc.H = sc.W = 32;
  const Corpus ca = generate_corpus(sa);
  const Corpus cb = generate_corpus(sb);
  const Corpus cc = generate_corpus(sc);

  SUBCASE("zero ratio never samples") {
    SamplingSchedule sched;
    sched.ratios = {{"syntha", 1.0}, {"synthb", 0.0}};
    sched.seed = 7;
    SampleStream stream(sched, {&ca, &cb});
    for (int i = 0; i < 500; ++i) CHECK(stream.next().dataset_id == "syntha");
  }

  SUBCASE("1:1:0.75 frequencies") {
    SamplingSchedule sched;
    sched.ratios = {{"syntha", 1.0}, {"synthb", 1.0}, {"synthc", 0.75}};
    sched.seed = 11;
    SampleStream stream(sched, {&ca, &cb, &cc});
    std::map<std::string, int> counts;
    std::map<std::string, int> clip_counts;
    const int draws = 110000;
    for (int i = 0; i < draws; ++i) {
      const VideoClip& clip = stream.next();
      counts[clip.dataset_id]++;
      clip_counts[clip.clip_id]++;
    }
    const double fa = counts["syntha"] / double(draws);
    const double fb = counts["synthb"] / double(draws);
    const double fc = counts["synthc"] / double(draws);
    CHECK(std::abs(fa - 4.0 / 11.0) < 0.005);
    CHECK(std::abs(fb - 4.0 / 11.0) < 0.005);
    CHECK(std::abs(fc - 3.0 / 11.0) < 0.005);
    // Clips inside one dataset are drawn uniformly: chi-square against the
    // uniform expectation, 3 dof per dataset, generous 0.001-level bound.
    for (const auto& [dataset, total] : counts) {
      const double expect = total / 4.0;
      double chi2 = 0.0;
      for (int k = 0; k < 4; ++k) {
        char id[64];
        std::snprintf(id, sizeof(id), "%s_%06d", dataset.c_str(), k);
        const double diff = clip_counts[id] - expect;
        chi2 += diff * diff / expect;
      }
      CHECK(chi2 < 16.27);
    }
  }

  SUBCASE("deterministic under same seed") {
    SamplingSchedule sched;
    sched.ratios = {{"syntha", 1.0}, {"synthb", 1.0}};
    sched.seed = 3;
    SampleStream s1(sched, {&ca, &cb});
    SampleStream s2(sched, {&ca, &cb});
    for (int i = 0; i < 200; ++i) CHECK(s1.next().clip_id == s2.next().clip_id);
  }

  SUBCASE("invalid schedules throw") {
    SamplingSchedule sched;
    sched.ratios = {{"syntha", 1.0}};
    CHECK_THROWS_AS(SampleStream(sched, {&ca, &cb}), std::invalid_argument);
    sched.ratios = {{"syntha", -1.0}, {"synthb", 1.0}};
    CHECK_THROWS_AS(SampleStream(sched, {&ca, &cb}), std::invalid_argument);
    sched.ratios = {{"syntha", 0.0}, {"synthb", 0.0}};
    CHECK_THROWS_AS(SampleStream(sched, {&ca, &cb}), std::invalid_argument);
    const Corpus empty;
    sched.ratios = {{"syntha", 1.0}, {"synthb", 1.0}};
    CHECK_THROWS_AS(SampleStream(sched, {&ca, &empty}), std::invalid_argument);
  }
}
