#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace taxovis {

// One inferred instance track; masks are binary, flattened as (t, y, x).
struct PredictedTrack {
  int category = 0;
  double score = 0.0;  // in [0, 1]
  std::vector<std::uint8_t> masks;
};

// Ground-truth counterpart keyed by a global category id.
struct GtEvalTrack {
  int category = 0;
  std::vector<std::uint8_t> masks;
};

struct EvalResult {
  double ap = 0.0;  // mean over IoU thresholds 0.50:0.05:0.95
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar1 = 0.0;
  double ar10 = 0.0;
  std::map<int, double> per_category_ap;  // categories with >= 1 gt track
};

// Spatio-temporal IoU: intersection and union are summed over every frame
// before dividing, so sparse frames weigh less than dense ones.
double track_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

// Track-level protocol: per category and IoU threshold, predictions sorted by
// score (ties by clip id, then track index) greedily claim the highest-IoU
// unmatched ground-truth track of the same clip and category. AP is 101-point
// interpolated. AR_k keeps only the k best-scoring predictions per clip and
// category before matching. All metrics are percentages averaged over the
// given categories that have at least one ground-truth track.
EvalResult evaluate(const std::map<std::string, std::vector<PredictedTrack>>& preds,
                    const std::map<std::string, std::vector<GtEvalTrack>>& gts,
                    const std::vector<int>& categories);

}  // namespace taxovis
