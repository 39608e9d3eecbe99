#include "taxovis/tape.hpp"

#include <cmath>
#include <utility>

namespace taxovis::ad {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw std::invalid_argument(std::string(op) + ": vars must live on one tape");
  }
  return *a.tape;
}

}  // namespace

Var Tape::input(Matrix value, bool requires_grad) {
  return emit(std::move(value), requires_grad, nullptr);
}

Var Tape::emit(Matrix value, bool requires_grad, PullFn pull) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  return nodes_.at(static_cast<size_t>(v.id))->value;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = *nodes_.at(static_cast<size_t>(v.id));
  if (!n.grad_alloc) {
    // Gradient was never touched: report zeros of the right shape.
    const_cast<Node&>(n).grad = Matrix::Zero(n.value.rows(), n.value.cols());
    const_cast<Node&>(n).grad_alloc = true;
  }
  return n.grad;
}

bool Tape::requires_grad(Var v) const {
  return nodes_.at(static_cast<size_t>(v.id))->requires_grad;
}

Matrix& Tape::grad_ref(int id) {
  Node& n = *nodes_.at(static_cast<size_t>(id));
  if (!n.grad_alloc) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (!root.valid() || root.tape != this) {
    throw std::invalid_argument("backward: invalid root");
  }
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  }
  grad_ref(root.id)(0, 0) += 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = *nodes_[static_cast<size_t>(i)];
    if (!n.grad_alloc || !n.pull || !n.requires_grad) continue;
    n.pull(*this, n.grad);
  }
}

Var constant(Tape& t, Matrix m) { return t.input(std::move(m), false); }

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  check_same_shape(val(a), val(b), "add");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a) + val(b);
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g;
    if (tp.requires_grad(Var{&tp, ib})) tp.grad_ref(ib) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  check_same_shape(val(a), val(b), "sub");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a) - val(b);
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g;
    if (tp.requires_grad(Var{&tp, ib})) tp.grad_ref(ib) -= g;
  });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_rowvec");
  const Matrix& r = val(row);
  if (r.rows() != 1 || r.cols() != val(a).cols()) {
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
  }
  const bool rg = t.requires_grad(a) || t.requires_grad(row);
  Matrix out = val(a).rowwise() + r.row(0);
  int ia = a.id, ir = row.id;
  return t.emit(std::move(out), rg, [ia, ir](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g;
    if (tp.requires_grad(Var{&tp, ir})) tp.grad_ref(ir) += g.colwise().sum();
  });
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  Matrix out = val(a).array() + c;
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g;
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Matrix out = val(a) * s;
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia, s](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += s * g;
  });
}

Var cmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "cmul");
  check_same_shape(val(a), val(b), "cmul");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a).cwiseProduct(val(b));
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia}))
      tp.grad_ref(ia) += g.cwiseProduct(tp.value(Var{&tp, ib}));
    if (tp.requires_grad(Var{&tp, ib}))
      tp.grad_ref(ib) += g.cwiseProduct(tp.value(Var{&tp, ia}));
  });
}

Var cdiv(Var a, Var b) {
  Tape& t = same_tape(a, b, "cdiv");
  check_same_shape(val(a), val(b), "cdiv");
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a).cwiseQuotient(val(b));
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(Var{&tp, ia});
    const Matrix& bv = tp.value(Var{&tp, ib});
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g.cwiseQuotient(bv);
    if (tp.requires_grad(Var{&tp, ib}))
      tp.grad_ref(ib) -= g.cwiseProduct(av).cwiseQuotient(bv.cwiseProduct(bv));
  });
}

Var cmul_const(Var a, const Matrix& m) {
  Tape& t = *a.tape;
  check_same_shape(val(a), m, "cmul_const");
  Matrix out = val(a).cwiseProduct(m);
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia, m](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g.cwiseProduct(m);
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  if (val(a).cols() != val(b).rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a) * val(b);
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia}))
      tp.grad_ref(ia) += g * tp.value(Var{&tp, ib}).transpose();
    if (tp.requires_grad(Var{&tp, ib}))
      tp.grad_ref(ib) += tp.value(Var{&tp, ia}).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  if (val(a).cols() != val(b).cols()) {
    throw std::invalid_argument("matmul_nt: column counts disagree");
  }
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Matrix out = val(a) * val(b).transpose();
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g * tp.value(Var{&tp, ib});
    if (tp.requires_grad(Var{&tp, ib}))
      tp.grad_ref(ib) += g.transpose() * tp.value(Var{&tp, ia});
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, ia})) return;
    const Matrix& x = tp.value(Var{&tp, ia});
    Matrix s = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    tp.grad_ref(ia) += g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  });
}

Var activation(Var a, Activation act) {
  Tape& t = *a.tape;
  Matrix out = val(a).unaryExpr([act](double x) { return activation_value(act, x); });
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia, act](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, ia})) return;
    const Matrix& x = tp.value(Var{&tp, ia});
    Matrix d = x.unaryExpr([act](double v) { return activation_deriv(act, v); });
    tp.grad_ref(ia) += g.cwiseProduct(d);
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& x = val(a);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  int ia = a.id;
  int self = t.size();  // this node's id, assigned by emit below
  return t.emit(std::move(out), t.requires_grad(a), [ia, self](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, ia})) return;
    const Matrix& y = tp.value(Var{&tp, self});
    Matrix& ga = tp.grad_ref(ia);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      ga.row(i) += y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(x, gamma, "layer_norm_rows");
  same_tape(x, beta, "layer_norm_rows");
  const Matrix& xv = val(x);
  const Matrix& gv = val(gamma);
  const Matrix& bv = val(beta);
  if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols()) {
    throw std::invalid_argument("layer_norm_rows: gamma/beta must be 1 x cols(x)");
  }
  const auto ncols = static_cast<double>(xv.cols());
  Vector mu(xv.rows()), inv_sigma(xv.rows());
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    mu(i) = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu(i)).square().sum() / ncols;
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) =
        ((xv.row(i).array() - mu(i)) * inv_sigma(i)) * gv.row(0).array() + bv.row(0).array();
  }
  const bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  int ix = x.id, ig = gamma.id, ib = beta.id;
  return t.emit(std::move(out), rg,
                [ix, ig, ib, mu, inv_sigma, ncols](Tape& tp, const Matrix& g) {
    const Matrix& xv2 = tp.value(Var{&tp, ix});
    const Matrix& gv2 = tp.value(Var{&tp, ig});
    for (Eigen::Index i = 0; i < xv2.rows(); ++i) {
      Eigen::RowVectorXd xhat = (xv2.row(i).array() - mu(i)).matrix() * inv_sigma(i);
      if (tp.requires_grad(Var{&tp, ig}))
        tp.grad_ref(ig).row(0) += g.row(i).cwiseProduct(xhat);
      if (tp.requires_grad(Var{&tp, ib})) tp.grad_ref(ib).row(0) += g.row(i);
      if (tp.requires_grad(Var{&tp, ix})) {
        Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gv2.row(0));
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat).sum() / ncols;
        tp.grad_ref(ix).row(i) +=
            inv_sigma(i) *
            (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat).matrix();
      }
    }
  });
}

Var gather_rows(Var a, std::vector<int> rows) {
  Tape& t = *a.tape;
  const Matrix& av = val(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows()) {
      throw std::invalid_argument("gather_rows: index out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
  }
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a),
                [ia, rows = std::move(rows)](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, ia})) return;
    Matrix& ga = tp.grad_ref(ia);
    for (size_t i = 0; i < rows.size(); ++i) {
      ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_rows");
  const Matrix& av = val(a);
  const Matrix& bv = val(b);
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("concat_rows: column counts disagree");
  }
  Matrix out(av.rows() + bv.rows(), av.cols());
  out.topRows(av.rows()) = av;
  out.bottomRows(bv.rows()) = bv;
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  int ia = a.id, ib = b.id;
  const Eigen::Index na = av.rows(), nb = bv.rows();
  return t.emit(std::move(out), rg, [ia, ib, na, nb](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia) += g.topRows(na);
    if (tp.requires_grad(Var{&tp, ib})) tp.grad_ref(ib) += g.bottomRows(nb);
  });
}

Var slice_cols(Var a, int start, int n) {
  Tape& t = *a.tape;
  const Matrix& av = val(a);
  if (start < 0 || n <= 0 || start + n > av.cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  Matrix out = av.middleCols(start, n);
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia, start, n](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia).middleCols(start, n) += g;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Tape& t = *parts.front().tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = val(parts.front()).rows();
  bool rg = false;
  for (const Var& p : parts) {
    if (val(p).rows() != rows) throw std::invalid_argument("concat_cols: row counts disagree");
    cols += val(p).cols();
    rg = rg || t.requires_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    out.middleCols(off, val(p).cols()) = val(p);
    ids.push_back(p.id);
    widths.push_back(val(p).cols());
    off += val(p).cols();
  }
  return t.emit(std::move(out), rg, [ids, widths](Tape& tp, const Matrix& g) {
    Eigen::Index o = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (tp.requires_grad(Var{&tp, ids[i]}))
        tp.grad_ref(ids[i]) += g.middleCols(o, widths[i]);
      o += widths[i];
    }
  });
}

Var mean_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& av = val(a);
  Matrix out = av.colwise().mean();
  int ia = a.id;
  const double inv_n = 1.0 / static_cast<double>(av.rows());
  return t.emit(std::move(out), t.requires_grad(a), [ia, inv_n](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, ia})) return;
    Matrix& ga = tp.grad_ref(ia);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) ga.row(i) += inv_n * g.row(0);
  });
}

Var broadcast_row(Var row, int nrows) {
  Tape& t = *row.tape;
  const Matrix& rv = val(row);
  if (rv.rows() != 1) throw std::invalid_argument("broadcast_row: input must be 1 x cols");
  Matrix out = rv.replicate(nrows, 1);
  int ir = row.id;
  return t.emit(std::move(out), t.requires_grad(row), [ir](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ir})) tp.grad_ref(ir) += g.colwise().sum();
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = val(a).sum();
  int ia = a.id;
  return t.emit(std::move(out), t.requires_grad(a), [ia](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(Var{&tp, ia})) tp.grad_ref(ia).array() += g(0, 0);
  });
}

Var rowwise_dot(Var a, Var b) {
  Tape& t = same_tape(a, b, "rowwise_dot");
  check_same_shape(val(a), val(b), "rowwise_dot");
  Matrix out(val(a).rows(), 1);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, 0) = val(a).row(i).dot(val(b).row(i));
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  int ia = a.id, ib = b.id;
  return t.emit(std::move(out), rg, [ia, ib](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(Var{&tp, ia});
    const Matrix& bv = tp.value(Var{&tp, ib});
    if (tp.requires_grad(Var{&tp, ia})) {
      Matrix& ga = tp.grad_ref(ia);
      for (Eigen::Index i = 0; i < av.rows(); ++i) ga.row(i) += g(i, 0) * bv.row(i);
    }
    if (tp.requires_grad(Var{&tp, ib})) {
      Matrix& gb = tp.grad_ref(ib);
      for (Eigen::Index i = 0; i < av.rows(); ++i) gb.row(i) += g(i, 0) * av.row(i);
    }
  });
}

Var cross_entropy_rows(Var logits, std::vector<int> targets, std::vector<double> weights) {
  Tape& t = *logits.tape;
  const Matrix& z = val(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows() ||
      weights.size() != targets.size()) {
    throw std::invalid_argument("cross_entropy_rows: targets/weights must match row count");
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) throw std::invalid_argument("cross_entropy_rows: weights sum must be positive");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int tgt = targets[static_cast<size_t>(i)];
    if (tgt < 0 || tgt >= z.cols()) {
      throw std::invalid_argument("cross_entropy_rows: target index out of range");
    }
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += weights[static_cast<size_t>(i)] * (lse - z(i, tgt));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / wsum;
  int iz = logits.id;
  return t.emit(std::move(out), t.requires_grad(logits),
                [iz, targets = std::move(targets), weights = std::move(weights),
                 wsum](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, iz})) return;
    const Matrix& zv = tp.value(Var{&tp, iz});
    Matrix& gz = tp.grad_ref(iz);
    const double gs = g(0, 0) / wsum;
    for (Eigen::Index i = 0; i < zv.rows(); ++i) {
      const double m = zv.row(i).maxCoeff();
      Eigen::RowVectorXd e = (zv.row(i).array() - m).exp();
      Eigen::RowVectorXd p = e / e.sum();
      p(targets[static_cast<size_t>(i)]) -= 1.0;
      gz.row(i) += gs * weights[static_cast<size_t>(i)] * p;
    }
  });
}

Var bce_with_logits_mean(Var logits, Matrix targets) {
  Tape& t = *logits.tape;
  const Matrix& z = val(logits);
  check_same_shape(z, targets, "bce_with_logits_mean");
  const double count = static_cast<double>(z.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double zv = z(i, j), tv = targets(i, j);
      loss += std::max(zv, 0.0) - zv * tv + std::log1p(std::exp(-std::abs(zv)));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = loss / count;
  int iz = logits.id;
  return t.emit(std::move(out), t.requires_grad(logits),
                [iz, targets = std::move(targets), count](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(Var{&tp, iz})) return;
    const Matrix& zv = tp.value(Var{&tp, iz});
    Matrix s = zv.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    tp.grad_ref(iz) += (g(0, 0) / count) * (s - targets);
  });
}

}  // namespace taxovis::ad
