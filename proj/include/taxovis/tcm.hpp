#pragma once

#include <vector>

#include "taxovis/blocks.hpp"

namespace taxovis {

// Video features flattened to (T*H*W) x D, positional encodings already
// added into `values`; `pos` is kept so tests can recover the raw content.
struct VideoFeatures {
  Matrix values;
  Matrix pos;
  int T = 0, H = 0, W = 0, D = 0;
};

struct TcmVars {
  AttnBlockVars xattn1, xattn2;
  FfnVars ffn1, ffn2;
  LinearVars score;  // D x D map applied to the refined embeddings
};

struct CompiledTaxonomy {
  Var E1;                     // K x D adapted embeddings (input, echoed)
  Var E2;                     // K x D after first refine stage
  Var E3;                     // K x D after second refine stage
  Var S_logits;               // K x 1 pre-sigmoid scores
  Var S;                      // K x 1 scores in (0,1)
  std::vector<int> selected;  // N_T indices, descending score, ties -> lower index
  Var E_T;                    // N_T x D rows gathered from E3
};

TcmVars bind_tcm(Binder& bind, const std::string& prefix, int D, int ffn_hidden, int heads,
                 Activation act);

// Indices of the n largest scores, descending, ties broken by lower index.
std::vector<int> topk_select(const Vector& scores, int n);

// E2 = FFN(CrossAttn(E1, F)); E3 = FFN(CrossAttn(E2, F));
// S_i = sigmoid(Linear(E3)_i . E1_i); E_T = E3[top N_T of S].
CompiledTaxonomy tcm_forward(Var E1, Var F, const TcmVars& p, int n_t);

}  // namespace taxovis
