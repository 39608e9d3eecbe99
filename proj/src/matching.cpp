#include "taxovis/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace taxovis {

namespace {

constexpr double kExclude = -1e30;

// Row mask: 0 for allowed columns, kExclude for categories outside the
// dataset; the last (no-object) column is always allowed.
Matrix logit_mask(int n_rows, int cols, const DatasetMask* dmask) {
  Matrix m = Matrix::Zero(n_rows, cols);
  if (!dmask) return m;
  if (static_cast<int>(dmask->mask.size()) != cols - 1) {
    throw std::invalid_argument("dataset mask size does not match class count");
  }
  for (int k = 0; k + 1 < cols; ++k) {
    if (!dmask->mask[static_cast<size_t>(k)]) m.col(k).setConstant(kExclude);
  }
  return m;
}

double masked_log_prob(const Matrix& class_logits, int query, int category,
                       const DatasetMask* dmask) {
  const int cols = static_cast<int>(class_logits.cols());
  double max_z = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cols; ++k) {
    const bool allowed =
        !dmask || k + 1 == cols || dmask->mask[static_cast<size_t>(k)];
    if (allowed) max_z = std::max(max_z, class_logits(query, k));
  }
  double sum = 0.0;
  for (int k = 0; k < cols; ++k) {
    const bool allowed =
        !dmask || k + 1 == cols || dmask->mask[static_cast<size_t>(k)];
    if (allowed) sum += std::exp(class_logits(query, k) - max_z);
  }
  return class_logits(query, category) - max_z - std::log(sum);
}

}  // namespace

double dice_cost(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                 const Eigen::Ref<const Eigen::RowVectorXd>& gt) {
  if (logits.size() != gt.size()) throw std::invalid_argument("dice_cost: shape mismatch");
  double pg = 0.0, p_sum = 0.0, g_sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    pg += p * gt[i];
    p_sum += p;
    g_sum += gt[i];
  }
  return 1.0 - (2.0 * pg + 1.0) / (p_sum + g_sum + 1.0);
}

double bce_cost(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                const Eigen::Ref<const Eigen::RowVectorXd>& gt) {
  if (logits.size() != gt.size()) throw std::invalid_argument("bce_cost: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    acc += std::max(z, 0.0) - z * gt[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return acc / static_cast<double>(logits.size());
}

double pair_cost(const Matrix& class_logits, const Matrix& mask_logits, int query,
                 const GtTrack& track, const DatasetMask* dmask, const LossWeights& w) {
  if (!class_logits.allFinite() || !mask_logits.allFinite()) {
    throw std::invalid_argument("pair_cost: non-finite logits");
  }
  if (track.category < 0 || track.category + 1 >= class_logits.cols()) {
    throw std::invalid_argument("pair_cost: category out of range");
  }
  const double p_cls =
      std::exp(masked_log_prob(class_logits, query, track.category, dmask));
  return w.lambda_cls * (-p_cls) +
         w.lambda_bce * bce_cost(mask_logits.row(query), track.mask.row(0)) +
         w.lambda_dice * dice_cost(mask_logits.row(query), track.mask.row(0));
}

Matrix build_cost_matrix(const Matrix& class_logits, const Matrix& mask_logits,
                         const std::vector<GtTrack>& tracks, const DatasetMask* dmask,
                         const LossWeights& w) {
  const int n = static_cast<int>(class_logits.rows());
  const int g = static_cast<int>(tracks.size());
  Matrix cost(n, g);
  for (int q = 0; q < n; ++q)
    for (int t = 0; t < g; ++t)
      cost(q, t) = pair_cost(class_logits, mask_logits, q, tracks[static_cast<size_t>(t)],
                             dmask, w);
  return cost;
}

namespace {

// O(n^3) assignment with potentials: rows = tracks, cols = queries, n <= m.
// Returns the minimum total cost and the query chosen for each track.
double solve_assignment(const Matrix& cost_tq, std::vector<int>* q_of_track) {
  const int n = static_cast<int>(cost_tq.rows());
  const int m = static_cast<int>(cost_tq.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost_tq(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  if (q_of_track) q_of_track->assign(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    const int i = p[static_cast<size_t>(j)];
    if (i == 0) continue;
    total += cost_tq(i - 1, j - 1);
    if (q_of_track) (*q_of_track)[static_cast<size_t>(i - 1)] = j - 1;
  }
  return total;
}

}  // namespace

MatchAssignment hungarian_match(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int g = static_cast<int>(cost.cols());
  if (g > n) throw std::invalid_argument("hungarian_match: more tracks than queries");
  if (!cost.allFinite()) throw std::invalid_argument("hungarian_match: non-finite cost");

  MatchAssignment out;
  if (g == 0) {
    for (int q = 0; q < n; ++q) out.unmatched.push_back(q);
    return out;
  }

  const Matrix cost_tq = cost.transpose();
  const double best = solve_assignment(cost_tq, nullptr);
  const double eps = 1e-9 * std::max(1.0, std::abs(best));

  // Lexicographically smallest query vector among (near-)minimizers: fix
  // tracks in order, taking the smallest query whose completion stays within
  // eps of the optimum.
  std::vector<int> chosen(static_cast<size_t>(g), -1);
  std::vector<char> used(static_cast<size_t>(n), 0);
  double fixed_cost = 0.0;
  for (int t = 0; t < g; ++t) {
    const int rem_tracks = g - t - 1;
    bool placed = false;
    for (int q = 0; q < n && !placed; ++q) {
      if (used[static_cast<size_t>(q)]) continue;
      double completion = 0.0;
      if (rem_tracks > 0) {
        // Subproblem over the remaining tracks and free queries.
        std::vector<int> free_q;
        for (int j = 0; j < n; ++j)
          if (!used[static_cast<size_t>(j)] && j != q) free_q.push_back(j);
        Matrix sub(rem_tracks, static_cast<int>(free_q.size()));
        for (int r = 0; r < rem_tracks; ++r)
          for (size_t c = 0; c < free_q.size(); ++c)
            sub(r, static_cast<int>(c)) = cost_tq(t + 1 + r, free_q[c]);
        completion = solve_assignment(sub, nullptr);
      }
      if (fixed_cost + cost_tq(t, q) + completion <= best + eps) {
        chosen[static_cast<size_t>(t)] = q;
        used[static_cast<size_t>(q)] = 1;
        fixed_cost += cost_tq(t, q);
        placed = true;
      }
    }
    if (!placed) throw std::logic_error("hungarian_match: refinement failed");
  }

  out.cost = fixed_cost;
  for (int t = 0; t < g; ++t) out.pairs.emplace_back(chosen[static_cast<size_t>(t)], t);
  for (int q = 0; q < n; ++q)
    if (!used[static_cast<size_t>(q)]) out.unmatched.push_back(q);
  return out;
}

Var dice_loss(Var mask_logits_row, const Matrix& gt_mask) {
  if (val(mask_logits_row).rows() != 1 || gt_mask.rows() != 1 ||
      val(mask_logits_row).cols() != gt_mask.cols()) {
    throw std::invalid_argument("dice_loss: expected matching 1 x P shapes");
  }
  Var p = ad::sigmoid(mask_logits_row);
  Var pg = ad::sum_all(ad::cmul_const(p, gt_mask));
  Var p_sum = ad::sum_all(p);
  const double g_sum = gt_mask.sum();
  Var numer = ad::add_const(ad::scale(pg, 2.0), 1.0);
  Var denom = ad::add_const(p_sum, g_sum + 1.0);
  return ad::add_const(ad::scale(ad::cdiv(numer, denom), -1.0), 1.0);
}

Var bce_loss(Var mask_logits_row, const Matrix& gt_mask) {
  return ad::bce_with_logits_mean(mask_logits_row, gt_mask);
}

LossBreakdown total_loss(ad::Tape& tape, const InstancePredictionSet& preds,
                         const std::vector<GtTrack>& tracks,
                         const MatchAssignment& assign, const DatasetMask* dmask,
                         const LossWeights& w) {
  const Matrix& cls_val = val(preds.class_logits);
  const int n = static_cast<int>(cls_val.rows());
  const int cols = static_cast<int>(cls_val.cols());

  // One target/weight table drives both cross-entropies: matched queries aim
  // at their track's category, the rest at no-object with a small weight.
  std::vector<int> targets(static_cast<size_t>(n), cols - 1);
  std::vector<double> weights(static_cast<size_t>(n), w.null_weight);
  for (const auto& [q, t] : assign.pairs) {
    if (q < 0 || q >= n || t < 0 || t >= static_cast<int>(tracks.size())) {
      throw std::invalid_argument("total_loss: assignment index out of range");
    }
    const int cat = tracks[static_cast<size_t>(t)].category;
    if (cat < 0 || cat + 1 >= cols) {
      throw std::invalid_argument("total_loss: track category out of range");
    }
    if (dmask && !dmask->mask[static_cast<size_t>(cat)]) {
      throw std::invalid_argument("total_loss: matched category excluded by dataset mask");
    }
    targets[static_cast<size_t>(q)] = cat;
    weights[static_cast<size_t>(q)] = 1.0;
  }

  const Matrix mask_rows = logit_mask(n, cols, dmask);
  auto masked_ce = [&](Var logits) {
    Var masked = ad::add(logits, ad::constant(tape, mask_rows));
    return ad::cross_entropy_rows(masked, targets, weights);
  };

  Var l_cls = masked_ce(preds.class_logits);

  Var l_mask;
  if (!assign.pairs.empty()) {
    std::vector<Var> parts;
    for (const auto& [q, t] : assign.pairs) {
      Var row = ad::gather_rows(preds.mask_logits, {q});
      const Matrix& gt = tracks[static_cast<size_t>(t)].mask;
      parts.push_back(ad::add(ad::scale(bce_loss(row, gt), w.lambda_bce),
                              ad::scale(dice_loss(row, gt), w.lambda_dice)));
    }
    Var sum = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) sum = ad::add(sum, parts[i]);
    l_mask = ad::scale(sum, 1.0 / static_cast<double>(parts.size()));
  } else {
    l_mask = ad::constant(tape, Matrix::Zero(1, 1));
  }

  LossBreakdown out;
  out.l_cls = val(l_cls)(0, 0);
  out.l_mask = val(l_mask)(0, 0);
  Var total = ad::add(l_mask, ad::scale(l_cls, w.lambda_cls));
  if (preds.taxo_logits.valid() && w.lambda_taxo != 0.0) {
    Var l_taxo = masked_ce(preds.taxo_logits);
    out.l_taxo = val(l_taxo)(0, 0);
    total = ad::add(total, ad::scale(l_taxo, w.lambda_taxo));
  }
  out.total = total;
  out.total_value = val(total)(0, 0);
  if (!std::isfinite(out.total_value)) {
    throw std::runtime_error("total_loss: non-finite loss");
  }
  return out;
}

Var score_aux_loss(ad::Tape& tape, Var S_logits, const std::vector<int>& gt_categories) {
  (void)tape;
  const int k = static_cast<int>(val(S_logits).rows());
  Matrix target = Matrix::Zero(k, 1);
  for (int cat : gt_categories) {
    if (cat < 0 || cat >= k) throw std::invalid_argument("score_aux_loss: bad category");
    target(cat, 0) = 1.0;
  }
  return ad::bce_with_logits_mean(S_logits, target);
}

}  // namespace taxovis
