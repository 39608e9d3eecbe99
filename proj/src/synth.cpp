#include "taxovis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace taxovis {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::map<std::string, Archetype>& archetype_table() {
  auto small = [](const char* fam, const char* tex, double r, double g, double b) {
    return Archetype{fam, tex, 5.0, 8.0, {r, g, b}};
  };
  auto large = [](const char* fam, const char* tex, double r, double g, double b) {
    return Archetype{fam, tex, 10.0, 14.0, {r, g, b}};
  };
  static const std::map<std::string, Archetype> table = {
      // Two near-identical pairs (same family/texture/color, size band apart)
      // exercise similar-category separation: the disc pair and the diamond pair.
      {"disc_solid_small", small("disc", "solid", 0.85, 0.10, 0.10)},
      {"disc_solid_large", large("disc", "solid", 0.85, 0.10, 0.10)},
      {"square_solid_small", small("square", "solid", 0.10, 0.20, 0.85)},
      {"triangle_solid_large", large("triangle", "solid", 0.10, 0.75, 0.15)},
      {"ring_solid_large", large("ring", "solid", 0.90, 0.85, 0.10)},
      {"cross_solid_small", small("cross", "solid", 0.85, 0.10, 0.80)},
      {"ellipse_striped_large", large("ellipse", "striped", 0.10, 0.80, 0.85)},
      {"diamond_dotted_small", small("diamond", "dotted", 0.95, 0.55, 0.10)},
      {"bar_striped_large", large("bar", "striped", 0.05, 0.55, 0.50)},
      {"square_dotted_large", large("square", "dotted", 0.50, 0.15, 0.80)},
      {"disc_striped_small", small("disc", "striped", 0.50, 0.50, 0.10)},
      {"cross_dotted_large", large("cross", "dotted", 0.10, 0.10, 0.50)},
      {"ellipse_solid_small", small("ellipse", "solid", 0.55, 0.10, 0.15)},
      {"triangle_striped_small", small("triangle", "striped", 0.55, 0.90, 0.10)},
      {"ring_dotted_small", small("ring", "dotted", 0.55, 0.35, 0.15)},
      {"bar_solid_small", small("bar", "solid", 0.95, 0.60, 0.70)},
      {"square_striped_large", large("square", "striped", 0.60, 0.60, 0.60)},
      {"ellipse_dotted_large", large("ellipse", "dotted", 0.90, 0.75, 0.20)},
      {"diamond_dotted_large", large("diamond", "dotted", 0.95, 0.55, 0.10)},
      {"disc_dotted_large", large("disc", "dotted", 0.95, 0.50, 0.45)},
      {"triangle_dotted_large", large("triangle", "dotted", 0.60, 0.30, 0.90)},
      {"bar_dotted_large", large("bar", "dotted", 0.30, 0.90, 0.80)},
  };
  return table;
}

constexpr double kBackground = 0.05;
constexpr int kMaskScale = 4;

std::array<double, 3> texture_color(const Archetype& a, double dx, double dy) {
  bool bright = true;
  if (a.texture == "striped") {
    bright = (static_cast<long long>(std::floor((dx + dy) / 4.0)) % 2 + 2) % 2 == 0;
  } else if (a.texture == "dotted") {
    const long long gx = (static_cast<long long>(std::floor(dx / 3.0)) % 2 + 2) % 2;
    const long long gy = (static_cast<long long>(std::floor(dy / 3.0)) % 2 + 2) % 2;
    bright = gx == 0 && gy == 0;
  }
  if (bright) return a.color;
  return {0.35 * a.color[0], 0.35 * a.color[1], 0.35 * a.color[2]};
}

struct PlacedInstance {
  const Archetype* arch;
  InstanceParams params;
  std::vector<std::pair<double, double>> centers;  // per frame
};

double reflect_into(double v, double lo, double hi) {
  if (lo >= hi) return (lo + hi) / 2.0;
  for (int iter = 0; iter < 64 && (v < lo || v > hi); ++iter) {
    if (v < lo) v = lo + (lo - v);
    if (v > hi) v = hi - (v - hi);
  }
  return std::clamp(v, lo, hi);
}

}  // namespace

const std::vector<std::string>& known_archetype_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : archetype_table()) v.push_back(name);
    return v;
  }();
  return names;
}

const Archetype& archetype_for(const std::string& category) {
  auto it = archetype_table().find(category);
  if (it == archetype_table().end()) {
    throw std::invalid_argument("no archetype for category '" + category + "'");
  }
  return it->second;
}

bool point_in_shape(const std::string& family, double dx, double dy, double r) {
  if (family == "disc") return dx * dx + dy * dy <= r * r;
  if (family == "square") return std::max(std::abs(dx), std::abs(dy)) <= r;
  if (family == "diamond") return std::abs(dx) + std::abs(dy) <= r;
  if (family == "ring") {
    const double d2 = dx * dx + dy * dy;
    return d2 >= 0.25 * r * r && d2 <= r * r;
  }
  if (family == "cross") {
    return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) ||
           (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
  }
  if (family == "ellipse") {
    const double a = dx / r, b = dy / (0.6 * r);
    return a * a + b * b <= 1.0;
  }
  if (family == "bar") return std::abs(dx) <= r && std::abs(dy) <= 0.4 * r;
  if (family == "triangle") {
    // Apex up at dy=-r, base at dy=0.8r with half-width 0.95r.
    if (dy < -r || dy > 0.8 * r) return false;
    return std::abs(dx) <= 0.95 * r * (dy + r) / (1.8 * r);
  }
  throw std::invalid_argument("unknown shape family '" + family + "'");
}

std::string spec_to_json(const SyntheticDatasetSpec& spec) {
  ordered_json j;
  j["schema_version"] = 1;
  j["dataset_id"] = spec.dataset_id;
  j["categories"] = spec.categories;
  j["clip_count"] = spec.clip_count;
  j["T"] = spec.T;
  j["H"] = spec.H;
  j["W"] = spec.W;
  j["min_instances"] = spec.min_instances;
  j["max_instances"] = spec.max_instances;
  j["max_speed"] = spec.max_speed;
  j["jitter"] = spec.jitter;
  j["occlusion_bias"] = spec.occlusion_bias;
  j["seed"] = spec.seed;
  return j.dump(2);
}

SyntheticDatasetSpec spec_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  if (j.value("schema_version", 0) != 1) {
    throw std::invalid_argument("dataset spec: unsupported schema_version");
  }
  SyntheticDatasetSpec s;
  s.dataset_id = j.at("dataset_id").get<std::string>();
  for (const auto& c : j.at("categories")) s.categories.push_back(c.get<std::string>());
  s.clip_count = j.value("clip_count", s.clip_count);
  s.T = j.value("T", s.T);
  s.H = j.value("H", s.H);
  s.W = j.value("W", s.W);
  s.min_instances = j.value("min_instances", s.min_instances);
  s.max_instances = j.value("max_instances", s.max_instances);
  s.max_speed = j.value("max_speed", s.max_speed);
  s.jitter = j.value("jitter", s.jitter);
  s.occlusion_bias = j.value("occlusion_bias", s.occlusion_bias);
  s.seed = j.value("seed", s.seed);
  if (s.categories.empty()) throw std::invalid_argument("dataset spec: no categories");
  if (s.min_instances < 1 || s.max_instances < s.min_instances) {
    throw std::invalid_argument("dataset spec: bad instance range");
  }
  if (s.H % 8 != 0 || s.W % 8 != 0) {
    throw std::invalid_argument("dataset spec: H and W must be divisible by 8");
  }
  return s;
}

uint64_t spec_hash(const SyntheticDatasetSpec& spec) { return fnv1a64(spec_to_json(spec)); }

bool is_stock_spec(const std::string& name) {
  return name == "syntha" || name == "synthb" || name == "synthc";
}

SyntheticDatasetSpec stock_spec(const std::string& name) {
  SyntheticDatasetSpec s;
  s.dataset_id = name;
  if (name == "syntha") {
    s.categories = {"disc_solid_small",     "disc_solid_large",  "square_solid_small",
                    "triangle_solid_large", "ring_solid_large",  "cross_solid_small",
                    "ellipse_striped_large", "diamond_dotted_small", "bar_striped_large",
                    "square_dotted_large"};
    s.seed = 1001;
  } else if (name == "synthb") {
    // Occlusion-heavy corpus sharing five categories with syntha.
    s.categories = {"disc_solid_small",  "square_solid_small", "triangle_solid_large",
                    "ring_solid_large",  "bar_striped_large",  "disc_striped_small",
                    "cross_dotted_large", "ellipse_solid_small"};
    s.min_instances = 3;
    s.max_instances = 6;
    s.occlusion_bias = 0.5;
    s.seed = 1002;
  } else if (name == "synthc") {
    s.categories = {"disc_solid_large",      "cross_solid_small",
                    "diamond_dotted_small",  "triangle_striped_small",
                    "ring_dotted_small",     "bar_solid_small",
                    "square_striped_large",  "ellipse_dotted_large",
                    "diamond_dotted_large",  "disc_dotted_large",
                    "triangle_dotted_large", "bar_dotted_large"};
    s.seed = 1003;
  } else {
    throw std::invalid_argument("unknown stock spec '" + name + "'");
  }
  return s;
}

VideoClip render_clip(const std::vector<InstanceParams>& instances,
                      const std::string& dataset_id, const std::string& clip_id, int T,
                      int H, int W) {
  if (H % kMaskScale != 0 || W % kMaskScale != 0) {
    throw std::invalid_argument("render_clip: H and W must be divisible by 4");
  }
  VideoClip clip;
  clip.dataset_id = dataset_id;
  clip.clip_id = clip_id;
  clip.T = T;
  clip.H = H;
  clip.W = W;
  clip.Hm = H / kMaskScale;
  clip.Wm = W / kMaskScale;

  std::vector<PlacedInstance> placed;
  for (const InstanceParams& p : instances) {
    PlacedInstance pi{&archetype_for(p.category), p, {}};
    const double lo_x = p.r + 2.0, hi_x = W - p.r - 2.0;
    const double lo_y = p.r + 2.0, hi_y = H - p.r - 2.0;
    if (lo_x >= hi_x || lo_y >= hi_y) {
      throw std::invalid_argument("render_clip: frame too small for instance of size " +
                                  std::to_string(p.r));
    }
    for (int t = 0; t < T; ++t) {
      double jx = 0, jy = 0;
      if (static_cast<size_t>(t) < p.jitter.size()) {
        jx = p.jitter[static_cast<size_t>(t)].first;
        jy = p.jitter[static_cast<size_t>(t)].second;
      }
      pi.centers.emplace_back(reflect_into(p.cx + p.vx * t + jx, lo_x, hi_x),
                              reflect_into(p.cy + p.vy * t + jy, lo_y, hi_y));
    }
    placed.push_back(std::move(pi));
  }

  const int n = static_cast<int>(placed.size());
  clip.frames.assign(static_cast<size_t>(T * H * W * 3), 0);
  std::vector<TrackData> tracks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    tracks[static_cast<size_t>(i)].category_name = placed[static_cast<size_t>(i)].params.category;
    tracks[static_cast<size_t>(i)].masks.assign(
        static_cast<size_t>(T * clip.Hm * clip.Wm), 0);
  }

  for (int t = 0; t < T; ++t) {
    // Full-resolution RGB: later-drawn instances paint over earlier ones.
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        std::array<double, 3> col{kBackground, kBackground, kBackground};
        const double px = x + 0.5, py = y + 0.5;
        for (int i = 0; i < n; ++i) {
          const PlacedInstance& pi = placed[static_cast<size_t>(i)];
          const double dx = px - pi.centers[static_cast<size_t>(t)].first;
          const double dy = py - pi.centers[static_cast<size_t>(t)].second;
          if (point_in_shape(pi.arch->family, dx, dy, pi.params.r)) {
            col = texture_color(*pi.arch, dx, dy);
          }
        }
        for (int c = 0; c < 3; ++c) {
          clip.frames[static_cast<size_t>(((t * H + y) * W + x) * 3 + c)] =
              static_cast<uint8_t>(std::lround(255.0 * col[static_cast<size_t>(c)]));
        }
      }
    }
    // Mask resolution: the same analytic shapes sampled at block centers;
    // the last instance containing a point owns it (occlusion partition).
    for (int my = 0; my < clip.Hm; ++my) {
      for (int mx = 0; mx < clip.Wm; ++mx) {
        const double px = (mx + 0.5) * kMaskScale, py = (my + 0.5) * kMaskScale;
        int owner = -1;
        for (int i = 0; i < n; ++i) {
          const PlacedInstance& pi = placed[static_cast<size_t>(i)];
          const double dx = px - pi.centers[static_cast<size_t>(t)].first;
          const double dy = py - pi.centers[static_cast<size_t>(t)].second;
          if (point_in_shape(pi.arch->family, dx, dy, pi.params.r)) owner = i;
        }
        if (owner >= 0) {
          tracks[static_cast<size_t>(owner)]
              .masks[static_cast<size_t>((t * clip.Hm + my) * clip.Wm + mx)] = 1;
        }
      }
    }
  }

  // Keep only tracks that stay visible somewhere.
  for (auto& tr : tracks) {
    bool visible = false;
    for (uint8_t v : tr.masks) visible = visible || v != 0;
    if (visible) clip.tracks.push_back(std::move(tr));
  }
  return clip;
}

VideoClip gen_clip(const SyntheticDatasetSpec& spec, int clip_index) {
  Rng rng = keyed_rng(spec.seed, spec.dataset_id + "/clip/" + std::to_string(clip_index));
  const int n = spec.min_instances + rng.uniform_int(spec.max_instances - spec.min_instances + 1);
  std::vector<InstanceParams> instances;
  for (int i = 0; i < n; ++i) {
    InstanceParams p;
    p.category = spec.categories[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(spec.categories.size())))];
    const Archetype& a = archetype_for(p.category);
    p.r = rng.uniform(a.r_min, a.r_max);
    const double lo_x = p.r + 2.0, hi_x = spec.W - p.r - 2.0;
    const double lo_y = p.r + 2.0, hi_y = spec.H - p.r - 2.0;
    if (lo_x >= hi_x || lo_y >= hi_y) {
      throw std::invalid_argument("gen_clip: frame too small for category " + p.category);
    }
    if (i > 0 && spec.occlusion_bias > 0.0 && rng.uniform() < spec.occlusion_bias) {
      const InstanceParams& prev =
          instances[static_cast<size_t>(rng.uniform_int(i))];
      p.cx = reflect_into(prev.cx + rng.uniform(-p.r, p.r), lo_x, hi_x);
      p.cy = reflect_into(prev.cy + rng.uniform(-p.r, p.r), lo_y, hi_y);
    } else {
      p.cx = rng.uniform(lo_x, hi_x);
      p.cy = rng.uniform(lo_y, hi_y);
    }
    p.vx = rng.uniform(-spec.max_speed, spec.max_speed);
    p.vy = rng.uniform(-spec.max_speed, spec.max_speed);
    for (int t = 0; t < spec.T; ++t) {
      p.jitter.emplace_back(rng.uniform(-spec.jitter, spec.jitter),
                            rng.uniform(-spec.jitter, spec.jitter));
    }
    instances.push_back(std::move(p));
  }
  char id[64];
  std::snprintf(id, sizeof(id), "%s_%06d", spec.dataset_id.c_str(), clip_index);
  VideoClip clip = render_clip(instances, spec.dataset_id, id, spec.T, spec.H, spec.W);
  // Local category ids resolve against the spec's list.
  for (TrackData& tr : clip.tracks) {
    for (size_t c = 0; c < spec.categories.size(); ++c) {
      if (spec.categories[c] == tr.category_name) tr.category_local = static_cast<int>(c);
    }
  }
  return clip;
}

Corpus generate_corpus(const SyntheticDatasetSpec& spec) {
  Corpus corpus;
  corpus.spec = spec;
  for (int i = 0; i < spec.clip_count; ++i) corpus.clips.push_back(gen_clip(spec, i));
  return corpus;
}

namespace {

constexpr char kClipMagic[8] = {'T', 'V', 'C', 'L', 'I', 'P', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("clip file truncated");
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["dataset_id"] = corpus.spec.dataset_id;
  manifest["categories"] = corpus.spec.categories;
  manifest["T"] = corpus.spec.T;
  manifest["H"] = corpus.spec.H;
  manifest["W"] = corpus.spec.W;
  manifest["spec_hash"] = spec_hash(corpus.spec);
  manifest["spec"] = ordered_json::parse(spec_to_json(corpus.spec));
  std::vector<std::string> ids;
  for (const VideoClip& c : corpus.clips) ids.push_back(c.clip_id);
  manifest["clips"] = ids;
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  for (const VideoClip& c : corpus.clips) {
    std::ofstream out(fs::path(dir) / (c.clip_id + ".bin"), std::ios::binary);
    out.write(kClipMagic, sizeof(kClipMagic));
    write_pod(out, static_cast<int32_t>(c.T));
    write_pod(out, static_cast<int32_t>(c.H));
    write_pod(out, static_cast<int32_t>(c.W));
    write_pod(out, static_cast<int32_t>(c.Hm));
    write_pod(out, static_cast<int32_t>(c.Wm));
    write_pod(out, static_cast<int32_t>(c.tracks.size()));
    out.write(reinterpret_cast<const char*>(c.frames.data()),
              static_cast<std::streamsize>(c.frames.size()));
    for (const TrackData& tr : c.tracks) {
      write_pod(out, static_cast<int32_t>(tr.category_local));
      out.write(reinterpret_cast<const char*>(tr.masks.data()),
                static_cast<std::streamsize>(tr.masks.size()));
    }
  }
}

Corpus load_corpus(const std::string& dir) {
  std::ifstream min(fs::path(dir) / "manifest.json");
  if (!min) throw std::runtime_error("no manifest.json in " + dir);
  ordered_json manifest = ordered_json::parse(min);
  if (manifest.value("schema_version", 0) != 1) {
    throw std::runtime_error("manifest: unsupported schema_version");
  }
  Corpus corpus;
  corpus.spec = spec_from_json(manifest.at("spec").dump());
  if (manifest.at("spec_hash").get<uint64_t>() != spec_hash(corpus.spec)) {
    throw std::runtime_error("manifest: spec hash mismatch");
  }
  for (const auto& idj : manifest.at("clips")) {
    const std::string id = idj.get<std::string>();
    std::ifstream in(fs::path(dir) / (id + ".bin"), std::ios::binary);
    if (!in) throw std::runtime_error("missing clip file " + id);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kClipMagic, 8) != 0) {
      throw std::runtime_error("bad clip magic in " + id);
    }
    VideoClip c;
    c.dataset_id = corpus.spec.dataset_id;
    c.clip_id = id;
    int32_t T, H, W, Hm, Wm, ntracks;
    read_pod(in, T);
    read_pod(in, H);
    read_pod(in, W);
    read_pod(in, Hm);
    read_pod(in, Wm);
    read_pod(in, ntracks);
    c.T = T;
    c.H = H;
    c.W = W;
    c.Hm = Hm;
    c.Wm = Wm;
    c.frames.resize(static_cast<size_t>(T) * H * W * 3);
    in.read(reinterpret_cast<char*>(c.frames.data()),
            static_cast<std::streamsize>(c.frames.size()));
    for (int i = 0; i < ntracks; ++i) {
      TrackData tr;
      int32_t cat;
      read_pod(in, cat);
      tr.category_local = cat;
      tr.category_name = corpus.spec.categories.at(static_cast<size_t>(cat));
      tr.masks.resize(static_cast<size_t>(T) * Hm * Wm);
      in.read(reinterpret_cast<char*>(tr.masks.data()),
              static_cast<std::streamsize>(tr.masks.size()));
      if (!in) throw std::runtime_error("clip file truncated in " + id);
      c.tracks.push_back(std::move(tr));
    }
    corpus.clips.push_back(std::move(c));
  }
  return corpus;
}

SampleStream::SampleStream(const SamplingSchedule& schedule,
                           std::vector<const Corpus*> corpora)
    : rng_(schedule.seed) {
  if (schedule.ratios.size() != corpora.size()) {
    throw std::invalid_argument("sample_stream: ratios and corpora must align");
  }
  double total = 0.0;
  for (size_t i = 0; i < schedule.ratios.size(); ++i) {
    const double r = schedule.ratios[i].second;
    if (r < 0.0) throw std::invalid_argument("sample_stream: negative ratio");
    if (r == 0.0) continue;
    if (corpora[i] == nullptr || corpora[i]->clips.empty()) {
      throw std::invalid_argument("sample_stream: positive ratio with empty corpus for " +
                                  schedule.ratios[i].first);
    }
    corpora_.push_back(corpora[i]);
    total += r;
    cumulative_.push_back(total);
  }
  if (corpora_.empty()) throw std::invalid_argument("sample_stream: no positive ratios");
  for (double& c : cumulative_) c /= total;
}

const VideoClip& SampleStream::next() {
  const double u = rng_.uniform();
  size_t pick = 0;
  while (pick + 1 < cumulative_.size() && u >= cumulative_[pick]) ++pick;
  const Corpus& corpus = *corpora_[pick];
  const int idx = rng_.uniform_int(static_cast<int>(corpus.clips.size()));
  return corpus.clips[static_cast<size_t>(idx)];
}

}  // namespace taxovis
