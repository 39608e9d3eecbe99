#include "taxovis/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace taxovis {

namespace {

struct RankedPred {
  double score = 0.0;
  const std::string* clip = nullptr;
  int index = 0;      // position in the clip's prediction list
  int clip_rank = 0;  // score rank within (clip, category); 0 = best
  std::vector<double> ious;  // vs the clip's gt tracks of this category
};

double ap101(const std::vector<char>& tp, int n_gt) {
  const int n = static_cast<int>(tp.size());
  if (n == 0) return 0.0;
  std::vector<double> prec(static_cast<size_t>(n)), rec(static_cast<size_t>(n));
  int cum = 0;
  for (int i = 0; i < n; ++i) {
    cum += tp[static_cast<size_t>(i)];
    prec[static_cast<size_t>(i)] = static_cast<double>(cum) / (i + 1);
    rec[static_cast<size_t>(i)] = static_cast<double>(cum) / n_gt;
  }
  std::vector<double> best(static_cast<size_t>(n));
  double run = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    run = std::max(run, prec[static_cast<size_t>(i)]);
    best[static_cast<size_t>(i)] = run;
  }
  double acc = 0.0;
  int j = 0;
  for (int r = 0; r <= 100; ++r) {
    const double target = r / 100.0;
    while (j < n && rec[static_cast<size_t>(j)] < target) ++j;
    if (j < n) acc += best[static_cast<size_t>(j)];
  }
  return acc / 101.0;
}

// Greedy matching over `order`; predictions ranked >= max_per_clip within
// their clip are skipped. Returns the TP flags for the retained predictions.
std::vector<char> greedy_match(const std::vector<RankedPred>& order, double theta,
                               int max_per_clip,
                               std::map<const std::string*, std::vector<char>>& used) {
  for (auto& [clip, flags] : used) std::fill(flags.begin(), flags.end(), 0);
  std::vector<char> tp;
  for (const RankedPred& p : order) {
    if (p.clip_rank >= max_per_clip) continue;
    std::vector<char>& flags = used.at(p.clip);
    int best_gt = -1;
    double best_iou = -1.0;
    for (size_t gi = 0; gi < p.ious.size(); ++gi) {
      if (flags[gi]) continue;
      if (p.ious[gi] > best_iou) {
        best_iou = p.ious[gi];
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0 && best_iou >= theta) {
      flags[static_cast<size_t>(best_gt)] = 1;
      tp.push_back(1);
    } else {
      tp.push_back(0);
    }
  }
  return tp;
}

}  // namespace

double track_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("track_iou: shape mismatch");
  std::int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

EvalResult evaluate(const std::map<std::string, std::vector<PredictedTrack>>& preds,
                    const std::map<std::string, std::vector<GtEvalTrack>>& gts,
                    const std::vector<int>& categories) {
  for (const auto& [clip, tracks] : preds) {
    if (gts.find(clip) == gts.end()) {
      throw std::invalid_argument("evaluate: prediction references unknown clip " + clip);
    }
    for (const PredictedTrack& t : tracks) {
      if (!std::isfinite(t.score) || t.score < 0.0 || t.score > 1.0) {
        throw std::invalid_argument("evaluate: score outside [0, 1] in clip " + clip);
      }
    }
  }

  EvalResult out;
  double sum_ap = 0, sum_ap50 = 0, sum_ap75 = 0, sum_ar1 = 0, sum_ar10 = 0;
  int n_cat = 0;
  for (int cat : categories) {
    int n_gt = 0;
    for (const auto& [clip, tracks] : gts) {
      for (const GtEvalTrack& t : tracks) n_gt += t.category == cat;
    }
    if (n_gt == 0) continue;

    std::vector<RankedPred> order;
    std::map<const std::string*, std::vector<char>> used;
    for (const auto& [clip, tracks] : gts) {
      std::vector<const GtEvalTrack*> cat_gts;
      for (const GtEvalTrack& t : tracks) {
        if (t.category == cat) cat_gts.push_back(&t);
      }
      used[&clip].assign(cat_gts.size(), 0);
      const auto pit = preds.find(clip);
      if (pit == preds.end()) continue;
      std::vector<RankedPred> local;
      for (size_t i = 0; i < pit->second.size(); ++i) {
        const PredictedTrack& p = pit->second[i];
        if (p.category != cat) continue;
        RankedPred rp;
        rp.score = p.score;
        rp.clip = &clip;
        rp.index = static_cast<int>(i);
        for (const GtEvalTrack* g : cat_gts) rp.ious.push_back(track_iou(p.masks, g->masks));
        local.push_back(std::move(rp));
      }
      std::sort(local.begin(), local.end(), [](const RankedPred& a, const RankedPred& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
      });
      for (size_t r = 0; r < local.size(); ++r) local[r].clip_rank = static_cast<int>(r);
      for (RankedPred& rp : local) order.push_back(std::move(rp));
    }
    std::sort(order.begin(), order.end(), [](const RankedPred& a, const RankedPred& b) {
      if (a.score != b.score) return a.score > b.score;
      if (*a.clip != *b.clip) return *a.clip < *b.clip;
      return a.index < b.index;
    });

    double cat_ap = 0, cat_ar1 = 0, cat_ar10 = 0;
    constexpr int kAll = std::numeric_limits<int>::max();
    for (int ti = 0; ti < 10; ++ti) {
      const double theta = (50 + 5 * ti) / 100.0;
      const std::vector<char> tp = greedy_match(order, theta, kAll, used);
      const double ap = ap101(tp, n_gt);
      cat_ap += ap;
      if (ti == 0) sum_ap50 += ap;
      if (ti == 5) sum_ap75 += ap;
      for (const int k : {1, 10}) {
        const std::vector<char> tpk = greedy_match(order, theta, k, used);
        const int hits = static_cast<int>(std::count(tpk.begin(), tpk.end(), 1));
        (k == 1 ? cat_ar1 : cat_ar10) += static_cast<double>(hits) / n_gt;
      }
    }
    cat_ap /= 10.0;
    sum_ap += cat_ap;
    sum_ar1 += cat_ar1 / 10.0;
    sum_ar10 += cat_ar10 / 10.0;
    out.per_category_ap[cat] = 100.0 * cat_ap;
    ++n_cat;
  }
  if (n_cat == 0) return out;
  out.ap = 100.0 * sum_ap / n_cat;
  out.ap50 = 100.0 * sum_ap50 / n_cat;
  out.ap75 = 100.0 * sum_ap75 / n_cat;
  out.ar1 = 100.0 * sum_ar1 / n_cat;
  out.ar10 = 100.0 * sum_ar10 / n_cat;
  return out;
}

}  // namespace taxovis
