#pragma once

#include "taxovis/common.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace taxovis::ad {

using taxovis::Matrix;

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid by default.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape over dense double matrices. Nodes are created by the free
// functions below; backward() accumulates gradients into every node that
// requires them. Values are immutable once recorded.
class Tape {
 public:
  Var input(Matrix value, bool requires_grad);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;  // valid after backward(); zero if untouched
  bool requires_grad(Var v) const;

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and walks the tape in
  // reverse creation order.
  void backward(Var root);

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- internal, used by the op implementations ---
  using PullFn = std::function<void(Tape&, const Matrix& upstream)>;
  Var emit(Matrix value, bool requires_grad, PullFn pull);
  Matrix& grad_ref(int id);  // lazily zero-initialized

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    PullFn pull;
  };
  std::vector<std::unique_ptr<Node>> nodes_;
  Matrix empty_;
};

// Convenience accessors.
inline const Matrix& val(Var v) { return v.tape->value(v); }
inline const Matrix& grad(Var v) { return v.tape->grad(v); }

Var constant(Tape& t, Matrix m);

// Elementwise / structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_rowvec(Var a, Var row);       // row: 1 x cols, broadcast over rows
Var add_const(Var a, double c);
Var scale(Var a, double s);
Var cmul(Var a, Var b);
Var cdiv(Var a, Var b);
Var cmul_const(Var a, const Matrix& m);
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);          // a * b^T
Var sigmoid(Var a);
Var activation(Var a, Activation act);
Var softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
Var gather_rows(Var a, std::vector<int> rows);
Var concat_rows(Var a, Var b);
Var slice_cols(Var a, int start, int n);
Var concat_cols(const std::vector<Var>& parts);
Var mean_rows(Var a);                 // 1 x cols column means
Var broadcast_row(Var row, int nrows);
Var sum_all(Var a);                   // 1 x 1
Var rowwise_dot(Var a, Var b);        // rows x 1

// Weighted-mean cross entropy over rows: sum_i w_i * (lse(z_i) - z_i[t_i]) / sum_i w_i.
Var cross_entropy_rows(Var logits, std::vector<int> targets, std::vector<double> weights);

// Mean binary cross entropy with logits against a fixed target matrix.
Var bce_with_logits_mean(Var logits, Matrix targets);

}  // namespace taxovis::ad
