#pragma once

#include <optional>
#include <vector>

#include "taxovis/decoder.hpp"
#include "taxovis/taxonomy.hpp"

namespace taxovis {

// One ground-truth track, loss-facing: category in the union space, mask
// flattened to match a mask_logits row.
struct GtTrack {
  int category = -1;
  Matrix mask;  // 1 x (T*Hm*Wm), entries 0/1
};

struct LossWeights {
  double lambda_cls = 2.0;
  double lambda_taxo = 0.5;
  double lambda_bce = 5.0;
  double lambda_dice = 5.0;
  double null_weight = 0.1;  // weight of the no-object class in the CE
};

// Value-level mask losses used by the matching cost (no gradients).
double dice_cost(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                 const Eigen::Ref<const Eigen::RowVectorXd>& gt);
double bce_cost(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                const Eigen::Ref<const Eigen::RowVectorXd>& gt);

// lambda_cls * (-p_class) + lambda_bce * BCE + lambda_dice * Dice, with the
// class probability taken from the dataset-masked softmax when dmask is set.
double pair_cost(const Matrix& class_logits, const Matrix& mask_logits, int query,
                 const GtTrack& track, const DatasetMask* dmask, const LossWeights& w);

Matrix build_cost_matrix(const Matrix& class_logits, const Matrix& mask_logits,
                         const std::vector<GtTrack>& tracks, const DatasetMask* dmask,
                         const LossWeights& w);

struct MatchAssignment {
  std::vector<std::pair<int, int>> pairs;  // (query, track), ordered by track
  std::vector<int> unmatched;              // queries assigned no-object
  double cost = 0.0;                       // total cost of the matched pairs
};

// Minimum-cost injective assignment of tracks (columns) to queries (rows);
// among minimizers, the lexicographically smallest query vector (by track).
MatchAssignment hungarian_match(const Matrix& cost);

// Tape-level mask losses for matched pairs.
Var dice_loss(Var mask_logits_row, const Matrix& gt_mask);
Var bce_loss(Var mask_logits_row, const Matrix& gt_mask);

struct LossBreakdown {
  Var total;  // scalar tape node
  double l_mask = 0.0, l_cls = 0.0, l_taxo = 0.0, total_value = 0.0;
};

// L_mask + lambda_cls * L_cls + lambda_taxo * L_taxo under one shared
// assignment. Class and taxonomy cross-entropies run over the union label
// space with out-of-dataset categories excluded from the softmax (no-object
// always allowed); unmatched queries contribute the no-object target at
// null_weight. L_taxo is skipped when the predictions carry no taxonomy head
// or lambda_taxo is zero.
LossBreakdown total_loss(ad::Tape& tape, const InstancePredictionSet& preds,
                         const std::vector<GtTrack>& tracks,
                         const MatchAssignment& assign, const DatasetMask* dmask,
                         const LossWeights& w);

// Optional supervision for the taxonomy scores: BCE of the pre-sigmoid score
// logits against "category appears in this clip's ground truth".
Var score_aux_loss(ad::Tape& tape, Var S_logits, const std::vector<int>& gt_categories);

}  // namespace taxovis
