#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "taxovis/tcm.hpp"
#include "test_util.hpp"

using namespace taxovis;
using testutil::max_abs_diff;
using testutil::random_matrix;

namespace {

constexpr Activation kAct = Activation::kGelu;

struct TcmFixture {
  ParamStore store;
  int D, heads;

  TcmFixture(uint64_t seed, int D_, int heads_) : store(seed), D(D_), heads(heads_) {
    ad::Tape t;
    Binder bind(t, store);
    bind_tcm(bind, "tcm", D, 2 * D, heads, kAct);
  }

  CompiledTaxonomy run(ad::Tape& t, const Matrix& E1, const Matrix& F, int n_t,
                       bool params_require_grad = true) {
    Binder bind(t, store);
    TcmVars p = bind_tcm(bind, "tcm", D, 2 * D, heads, kAct);
    (void)params_require_grad;
    return tcm_forward(t.input(E1, true), t.input(F, false), p, n_t);
  }

  ref::TcmOut run_ref(const Matrix& E1, const Matrix& F, int n_t) {
    return ref::tcm(ref::from_eigen(E1), ref::from_eigen(F),
                    testutil::ref_tcm(store, "tcm", heads, kAct), n_t);
  }
};

}  // namespace

TEST_CASE("topk_select ordering and tie-breaks") {
  Vector s(3);
  s << 0.9, 0.1, 0.5;
  CHECK(topk_select(s, 2) == std::vector<int>{0, 2});
  Vector eq = Vector::Constant(5, 0.5);
  CHECK(topk_select(eq, 3) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(topk_select(s, 0), std::invalid_argument);
  CHECK_THROWS_AS(topk_select(s, 4), std::invalid_argument);
}

TEST_CASE("topk_select equals a sort-based oracle on random scores") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Vector s(100);
    for (int i = 0; i < 100; ++i) s(i) = rng.uniform();
    std::vector<int> got = topk_select(s, 10);
    std::vector<std::pair<double, int>> pairs;
    for (int i = 0; i < 100; ++i) pairs.emplace_back(-s(i), i);
    std::sort(pairs.begin(), pairs.end());
    for (int i = 0; i < 10; ++i) CHECK(got[static_cast<size_t>(i)] == pairs[static_cast<size_t>(i)].second);
  }
}

TEST_CASE("tcm_forward matches the scalar oracle on a tiny instance") {
  const int K = 4, D = 4;
  TcmFixture fx(101, D, 1);
  Rng rng(55);
  Matrix E1 = random_matrix(rng, K, D);
  Matrix F = random_matrix(rng, 2, D);

  ad::Tape t;
  CompiledTaxonomy got = fx.run(t, E1, F, 2);
  ref::TcmOut oracle = fx.run_ref(E1, F, 2);

  CHECK(max_abs_diff(val(got.E2), ref::to_eigen(oracle.E2)) < 1e-9);
  CHECK(max_abs_diff(val(got.E3), ref::to_eigen(oracle.E3)) < 1e-9);
  for (int i = 0; i < K; ++i) {
    CHECK(val(got.S)(i, 0) == doctest::Approx(oracle.S[static_cast<size_t>(i)]).epsilon(1e-9));
  }
  CHECK(got.selected == oracle.selected);
  CHECK(max_abs_diff(val(got.E_T), ref::to_eigen(oracle.E_T)) < 1e-9);
}

TEST_CASE("tcm selection edge cases") {
  const int D = 4;
  TcmFixture fx(102, D, 2);
  Rng rng(56);
  Matrix F = random_matrix(rng, 3, D);

  // K=1: forced selection regardless of parameters.
  ad::Tape t1;
  CompiledTaxonomy one = fx.run(t1, random_matrix(rng, 1, D), F, 1);
  CHECK(one.selected == std::vector<int>{0});

  // Zero scoring map: S = 0.5 everywhere, ties fall back to lowest indices.
  fx.store.value("tcm.score.W").setZero();
  fx.store.value("tcm.score.b").setZero();
  ad::Tape t2;
  CompiledTaxonomy tied = fx.run(t2, random_matrix(rng, 5, D), F, 3);
  for (int i = 0; i < 5; ++i) CHECK(val(tied.S)(i, 0) == 0.5);
  CHECK(tied.selected == std::vector<int>{0, 1, 2});

  ad::Tape t3;
  Matrix E1 = random_matrix(rng, 3, D);
  CHECK_THROWS_AS(fx.run(t3, E1, F, 0), std::invalid_argument);
  CHECK_THROWS_AS(fx.run(t3, E1, F, 4), std::invalid_argument);
}

TEST_CASE("tcm scores stay in (0,1) and E_T gathers rows bitwise") {
  const int K = 8, D = 8;
  TcmFixture fx(103, D, 4);
  Rng rng(57);
  ad::Tape t;
  CompiledTaxonomy out = fx.run(t, random_matrix(rng, K, D), random_matrix(rng, 6, D), 5);
  for (int i = 0; i < K; ++i) {
    CHECK(val(out.S)(i, 0) > 0.0);
    CHECK(val(out.S)(i, 0) < 1.0);
  }
  for (size_t j = 0; j < out.selected.size(); ++j) {
    CHECK(val(out.E_T).row(static_cast<Eigen::Index>(j)) == val(out.E3).row(out.selected[j]));
  }
  // Selected indices unique.
  std::vector<int> sorted = out.selected;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("permuting categories permutes scores and selection consistently") {
  const int K = 6, D = 4;
  TcmFixture fx(104, D, 1);
  Rng rng(58);
  Matrix E1 = random_matrix(rng, K, D);
  Matrix F = random_matrix(rng, 3, D);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};  // new row i = old row perm[i]
  Matrix E1p(K, D);
  for (int i = 0; i < K; ++i) E1p.row(i) = E1.row(perm[static_cast<size_t>(i)]);

  ad::Tape ta, tb;
  CompiledTaxonomy base = fx.run(ta, E1, F, K);
  CompiledTaxonomy permuted = fx.run(tb, E1p, F, K);

  for (int i = 0; i < K; ++i) {
    CHECK(val(permuted.S)(i, 0) ==
          doctest::Approx(val(base.S)(perm[static_cast<size_t>(i)], 0)).epsilon(1e-12));
  }
  // Map the permuted selection back to original indices: same multiset order
  // requires mapping through perm; with all-distinct scores the descending
  // score order must coincide.
  std::vector<int> mapped;
  for (int idx : permuted.selected) mapped.push_back(perm[static_cast<size_t>(idx)]);
  CHECK(mapped == base.selected);
}

TEST_CASE("with N_T=K the selection is a permutation of all rows") {
  const int K = 7, D = 4;
  TcmFixture fx(105, D, 2);
  Rng rng(59);
  ad::Tape t;
  CompiledTaxonomy out = fx.run(t, random_matrix(rng, K, D), random_matrix(rng, 4, D), K);
  std::vector<int> sorted = out.selected;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < K; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
  // E_T contains every E3 row exactly once.
  for (int i = 0; i < K; ++i) {
    bool found = false;
    for (int j = 0; j < K; ++j) {
      found = found || (val(out.E_T).row(j) == val(out.E3).row(i));
    }
    CHECK(found);
  }
}

TEST_CASE("tcm gradients match finite differences") {
  const int K = 3, D = 4;
  Rng rng(60);
  Matrix E1 = random_matrix(rng, K, D);
  Matrix F = random_matrix(rng, 2, D);

  // Loss = sum(S) + sum(E_T); selection is locally constant so FD is valid.
  auto eval_loss = [&](ParamStore& store) -> double {
    ad::Tape t;
    Binder bind(t, store);
    TcmVars p = bind_tcm(bind, "tcm", D, 2 * D, 1, kAct);
    CompiledTaxonomy out = tcm_forward(t.input(E1, false), t.input(F, false), p, 2);
    return val(ad::add(ad::sum_all(out.S), ad::sum_all(out.E_T)))(0, 0);
  };

  ParamStore store(106);
  ad::Tape t;
  Binder bind(t, store);
  TcmVars p = bind_tcm(bind, "tcm", D, 2 * D, 1, kAct);
  CompiledTaxonomy out = tcm_forward(t.input(E1, false), t.input(F, false), p, 2);
  t.backward(ad::add(ad::sum_all(out.S), ad::sum_all(out.E_T)));
  auto grads = bind.grads();

  const double h = 1e-5;
  int checked = 0;
  for (const auto& [name, g] : grads) {
    Matrix& v = store.value(name);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double orig = v(i, j);
        v(i, j) = orig + h;
        const double up = eval_loss(store);
        v(i, j) = orig - h;
        const double dn = eval_loss(store);
        v(i, j) = orig;
        const double fd = (up - dn) / (2 * h);
        CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        ++checked;
      }
    }
  }
  CHECK(checked > 100);  // every parameter group covered
}
