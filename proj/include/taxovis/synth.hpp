#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "taxovis/common.hpp"

namespace taxovis {

// Renderable category archetype: shape family x texture x size band x color.
struct Archetype {
  std::string family;            // disc square triangle diamond ring cross ellipse bar
  std::string texture;           // solid striped dotted
  double r_min = 0, r_max = 0;   // half-extent band in full-res pixels
  std::array<double, 3> color{};
};

const std::vector<std::string>& known_archetype_names();
const Archetype& archetype_for(const std::string& category);

// Analytic point-in-shape predicate at full-res coordinates (dx, dy relative
// to the instance center), used by both rendering resolutions and by tests.
bool point_in_shape(const std::string& family, double dx, double dy, double r);

struct SyntheticDatasetSpec {
  std::string dataset_id;
  std::vector<std::string> categories;
  int clip_count = 64;
  int T = 5, H = 64, W = 64;
  int min_instances = 1, max_instances = 4;
  double max_speed = 2.0;
  double jitter = 0.5;
  double occlusion_bias = 0.0;  // chance an instance spawns on top of another
  uint64_t seed = 0;
};

std::string spec_to_json(const SyntheticDatasetSpec& spec);
SyntheticDatasetSpec spec_from_json(const std::string& json_text);
uint64_t spec_hash(const SyntheticDatasetSpec& spec);

// Stock corpora: syntha (10 categories), synthb (8, occlusion-heavy, 5 shared
// with A), synthc (12, 3 shared with A).
bool is_stock_spec(const std::string& name);
SyntheticDatasetSpec stock_spec(const std::string& name);

struct TrackData {
  int category_local = -1;
  std::string category_name;
  std::vector<uint8_t> masks;  // T * Hm * Wm, occlusion-resolved 0/1
};

struct VideoClip {
  std::string dataset_id;
  std::string clip_id;
  int T = 0, H = 0, W = 0;   // full resolution
  int Hm = 0, Wm = 0;        // mask resolution (H/4, W/4)
  std::vector<uint8_t> frames;  // T*H*W*3, row-major (t, y, x, channel)
  std::vector<TrackData> tracks;

  uint8_t rgb(int t, int y, int x, int c) const {
    return frames[static_cast<size_t>(((t * H + y) * W + x) * 3 + c)];
  }
  static uint8_t mask_at(const TrackData& tr, int t, int y, int x, int Hm, int Wm) {
    return tr.masks[static_cast<size_t>((t * Hm + y) * Wm + x)];
  }
};

// Exact instance placement, exposed so tests control geometry directly.
struct InstanceParams {
  std::string category;
  double r = 6;
  double cx = 32, cy = 32;
  double vx = 0, vy = 0;
  std::vector<std::pair<double, double>> jitter;  // per-frame (jx, jy); empty = zeros
};

VideoClip render_clip(const std::vector<InstanceParams>& instances,
                      const std::string& dataset_id, const std::string& clip_id, int T,
                      int H, int W);

VideoClip gen_clip(const SyntheticDatasetSpec& spec, int clip_index);

struct Corpus {
  SyntheticDatasetSpec spec;
  std::vector<VideoClip> clips;
};

Corpus generate_corpus(const SyntheticDatasetSpec& spec);
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

// Ratio-controlled multi-dataset sampler: each draw picks a dataset with
// probability ratio/sum, then a clip uniformly with replacement.
struct SamplingSchedule {
  std::vector<std::pair<std::string, double>> ratios;
  uint64_t seed = 0;
};

class SampleStream {
 public:
  SampleStream(const SamplingSchedule& schedule, std::vector<const Corpus*> corpora);
  const VideoClip& next();

 private:
  std::vector<const Corpus*> corpora_;  // positive-ratio entries only
  std::vector<double> cumulative_;
  Rng rng_;
};

}  // namespace taxovis
