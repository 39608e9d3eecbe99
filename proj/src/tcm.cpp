#include "taxovis/tcm.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace taxovis {

using namespace ad;

TcmVars bind_tcm(Binder& bind, const std::string& prefix, int D, int ffn_hidden, int heads,
                 Activation act) {
  TcmVars p;
  p.xattn1 = bind_attn_block(bind, prefix + ".xattn1", D, D, heads);
  p.ffn1 = bind_ffn(bind, prefix + ".ffn1", D, ffn_hidden, act);
  p.xattn2 = bind_attn_block(bind, prefix + ".xattn2", D, D, heads);
  p.ffn2 = bind_ffn(bind, prefix + ".ffn2", D, ffn_hidden, act);
  // Identity start so initial scores reflect raw E3/E1 alignment.
  p.score = {bind(prefix + ".score.W", D, D, Init::kIdentity),
             bind(prefix + ".score.b", 1, D, Init::kZeros)};
  return p;
}

std::vector<int> topk_select(const Vector& scores, int n) {
  const int k = static_cast<int>(scores.size());
  if (n < 1 || n > k) throw std::invalid_argument("topk_select: n out of range");
  std::vector<int> idx(static_cast<size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  idx.resize(static_cast<size_t>(n));
  return idx;
}

CompiledTaxonomy tcm_forward(Var E1, Var F, const TcmVars& p, int n_t) {
  const int K = static_cast<int>(val(E1).rows());
  if (n_t < 1 || n_t > K) throw std::invalid_argument("tcm_forward: N_T out of range");
  CompiledTaxonomy out;
  out.E1 = E1;
  out.E2 = ffn_block(attention_block(E1, F, p.xattn1), p.ffn1);
  out.E3 = ffn_block(attention_block(out.E2, F, p.xattn2), p.ffn2);
  out.S_logits = rowwise_dot(linear(out.E3, p.score), E1);
  out.S = sigmoid(out.S_logits);
  out.selected = topk_select(val(out.S).col(0), n_t);
  out.E_T = gather_rows(out.E3, out.selected);
  return out;
}

}  // namespace taxovis
