#pragma once

#include <string>
#include <vector>

#include "taxovis/params.hpp"
#include "taxovis/tape.hpp"

namespace taxovis {

using ad::Var;

struct LinearVars {
  Var W;
  Var b;
};

struct LayerNormVars {
  Var gamma;
  Var beta;
};

struct AttentionVars {
  LinearVars q, k, v, o;
  int heads = 1;
};

// Pre-norm residual blocks: x + Sublayer(LN(x)). With a zero output
// projection (attention) or zero second FC (ffn) the block is an exact
// identity, which the ablation reductions rely on.
struct AttnBlockVars {
  AttentionVars attn;
  LayerNormVars ln;
};

struct FfnVars {
  LinearVars fc1, fc2;
  LayerNormVars ln;
  Activation act = Activation::kGelu;
};

Var linear(Var x, const LinearVars& p);
Var layer_norm(Var x, const LayerNormVars& p);

// Scaled dot-product multi-head attention. Widths: q_in is M×Wq, k_in/v_in
// are P×Wk; all projections map into the q-side width. If attn_out is given
// it receives the per-head softmax matrices (M×P each).
Var mha(Var q_in, Var k_in, Var v_in, const AttentionVars& p,
        std::vector<Matrix>* attn_out = nullptr);

// x + MHA(LN(x) [+ qpos], ctx [+ kpos], ctx)
Var attention_block(Var x, Var ctx, const AttnBlockVars& p, Var qpos = {}, Var kpos = {},
                    std::vector<Matrix>* attn_out = nullptr);

// x + MHA(LN(x)+qpos, LN(x)+qpos, LN(x))
Var self_attention_block(Var x, const AttnBlockVars& p, Var qpos = {});

// x + FC2(act(FC1(LN(x))))
Var ffn_block(Var x, const FfnVars& p);

// Parameter binding with hierarchical names (<prefix>.W etc.).
LinearVars bind_linear(Binder& bind, const std::string& prefix, int in, int out,
                       Init w_init = Init::kXavier);
LayerNormVars bind_layer_norm(Binder& bind, const std::string& prefix, int width);
AttentionVars bind_attention(Binder& bind, const std::string& prefix, int q_width,
                             int kv_width, int heads);
AttnBlockVars bind_attn_block(Binder& bind, const std::string& prefix, int q_width,
                              int kv_width, int heads);
FfnVars bind_ffn(Binder& bind, const std::string& prefix, int width, int hidden,
                 Activation act);

}  // namespace taxovis
