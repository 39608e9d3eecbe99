#include "taxovis/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace taxovis {

using namespace ad;

Var linear(Var x, const LinearVars& p) { return add_rowvec(matmul(x, p.W), p.b); }

Var layer_norm(Var x, const LayerNormVars& p) {
  return layer_norm_rows(x, p.gamma, p.beta);
}

Var mha(Var q_in, Var k_in, Var v_in, const AttentionVars& p,
        std::vector<Matrix>* attn_out) {
  Var q = linear(q_in, p.q);
  Var k = linear(k_in, p.k);
  Var v = linear(v_in, p.v);
  const int width = static_cast<int>(val(q).cols());
  if (p.heads <= 0 || width % p.heads != 0) {
    throw std::invalid_argument("mha: head count must divide width");
  }
  const int dh = width / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(static_cast<size_t>(p.heads));
  for (int h = 0; h < p.heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
    if (attn_out) attn_out->push_back(val(attn));
    heads.push_back(matmul(attn, vh));
  }
  Var merged = p.heads == 1 ? heads[0] : concat_cols(heads);
  return linear(merged, p.o);
}

Var attention_block(Var x, Var ctx, const AttnBlockVars& p, Var qpos, Var kpos,
                    std::vector<Matrix>* attn_out) {
  Var h = layer_norm(x, p.ln);
  Var q_in = qpos.valid() ? add(h, qpos) : h;
  Var k_in = kpos.valid() ? add(ctx, kpos) : ctx;
  return add(x, mha(q_in, k_in, ctx, p.attn, attn_out));
}

Var self_attention_block(Var x, const AttnBlockVars& p, Var qpos) {
  Var h = layer_norm(x, p.ln);
  Var qk = qpos.valid() ? add(h, qpos) : h;
  return add(x, mha(qk, qk, h, p.attn));
}

Var ffn_block(Var x, const FfnVars& p) {
  Var h = layer_norm(x, p.ln);
  return add(x, linear(activation(linear(h, p.fc1), p.act), p.fc2));
}

LinearVars bind_linear(Binder& bind, const std::string& prefix, int in, int out,
                       Init w_init) {
  return {bind(prefix + ".W", in, out, w_init), bind(prefix + ".b", 1, out, Init::kZeros)};
}

LayerNormVars bind_layer_norm(Binder& bind, const std::string& prefix, int width) {
  return {bind(prefix + ".gamma", 1, width, Init::kOnes),
          bind(prefix + ".beta", 1, width, Init::kZeros)};
}

AttentionVars bind_attention(Binder& bind, const std::string& prefix, int q_width,
                             int kv_width, int heads) {
  AttentionVars p;
  p.q = bind_linear(bind, prefix + ".q", q_width, q_width);
  p.k = bind_linear(bind, prefix + ".k", kv_width, q_width);
  p.v = bind_linear(bind, prefix + ".v", kv_width, q_width);
  p.o = bind_linear(bind, prefix + ".o", q_width, q_width);
  p.heads = heads;
  return p;
}

AttnBlockVars bind_attn_block(Binder& bind, const std::string& prefix, int q_width,
                              int kv_width, int heads) {
  return {bind_attention(bind, prefix + ".attn", q_width, kv_width, heads),
          bind_layer_norm(bind, prefix + ".ln", q_width)};
}

FfnVars bind_ffn(Binder& bind, const std::string& prefix, int width, int hidden,
                 Activation act) {
  FfnVars p;
  p.fc1 = bind_linear(bind, prefix + ".fc1", width, hidden);
  p.fc2 = bind_linear(bind, prefix + ".fc2", hidden, width);
  p.ln = bind_layer_norm(bind, prefix + ".ln", width);
  p.act = act;
  return p;
}

}  // namespace taxovis
