#include "skvg/attention.hpp"

#include <cmath>

namespace skvg {

Var attn(Graph& g, Var q, Var k, Var v,
         const std::vector<std::uint8_t>* key_mask) {
  const Mat& Q = g.value(q);
  const Mat& K = g.value(k);
  const Mat& V = g.value(v);
  if (Q.cols() != K.cols()) {
    throw ShapeError("attn: Q and K widths differ");
  }
  if (K.rows() != V.rows()) {
    throw ShapeError("attn: K and V row counts differ");
  }
  const double dk = static_cast<double>(Q.cols());
  Var logits = g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(dk));
  Var weights = g.softmax_rows(logits, key_mask);
  return g.matmul(weights, v);
}

LayerParams LayerParams::create(ParamStore& store, const std::string& prefix,
                                int dim, int heads, int ff_dim, Rng& rng,
                                double lr) {
  if (heads <= 0 || dim % heads != 0) {
    throw ShapeError("LayerParams: dim must be divisible by head count");
  }
  LayerParams p;
  p.dim = dim;
  p.heads = heads;
  p.ff_dim = ff_dim;
  auto weight = [&](const std::string& n, int r, int c) {
    Parameter& w = store.create_xavier(prefix + "." + n, r, c, rng);
    w.lr = lr;
    return &w;
  };
  auto bias = [&](const std::string& n, int c) {
    Parameter& b = store.create(prefix + "." + n, 1, c);
    b.lr = lr;
    b.weight_decay = false;
    return &b;
  };
  auto norm = [&](const std::string& n, double fill) {
    Parameter& b = store.create_constant(prefix + "." + n, 1, dim, fill);
    b.lr = lr;
    b.weight_decay = false;
    return &b;
  };
  p.wq = weight("wq", dim, dim);
  p.bq = bias("bq", dim);
  p.wk = weight("wk", dim, dim);
  p.bk = bias("bk", dim);
  p.wv = weight("wv", dim, dim);
  p.bv = bias("bv", dim);
  p.wo = weight("wo", dim, dim);
  p.bo = bias("bo", dim);
  p.ln_q_gain = norm("ln_q_gain", 1.0);
  p.ln_q_offset = norm("ln_q_offset", 0.0);
  p.ln_kv_gain = norm("ln_kv_gain", 1.0);
  p.ln_kv_offset = norm("ln_kv_offset", 0.0);
  p.ln_ff_gain = norm("ln_ff_gain", 1.0);
  p.ln_ff_offset = norm("ln_ff_offset", 0.0);
  p.ff_w1 = weight("ff_w1", dim, ff_dim);
  p.ff_b1 = bias("ff_b1", ff_dim);
  p.ff_w2 = weight("ff_w2", ff_dim, dim);
  p.ff_b2 = bias("ff_b2", dim);
  return p;
}

LayerParams LayerParams::bind(ParamStore& store, const std::string& prefix,
                              int dim, int heads, int ff_dim) {
  LayerParams p;
  p.dim = dim;
  p.heads = heads;
  p.ff_dim = ff_dim;
  p.wq = &store.at(prefix + ".wq");
  p.bq = &store.at(prefix + ".bq");
  p.wk = &store.at(prefix + ".wk");
  p.bk = &store.at(prefix + ".bk");
  p.wv = &store.at(prefix + ".wv");
  p.bv = &store.at(prefix + ".bv");
  p.wo = &store.at(prefix + ".wo");
  p.bo = &store.at(prefix + ".bo");
  p.ln_q_gain = &store.at(prefix + ".ln_q_gain");
  p.ln_q_offset = &store.at(prefix + ".ln_q_offset");
  p.ln_kv_gain = &store.at(prefix + ".ln_kv_gain");
  p.ln_kv_offset = &store.at(prefix + ".ln_kv_offset");
  p.ln_ff_gain = &store.at(prefix + ".ln_ff_gain");
  p.ln_ff_offset = &store.at(prefix + ".ln_ff_offset");
  p.ff_w1 = &store.at(prefix + ".ff_w1");
  p.ff_b1 = &store.at(prefix + ".ff_b1");
  p.ff_w2 = &store.at(prefix + ".ff_w2");
  p.ff_b2 = &store.at(prefix + ".ff_b2");
  return p;
}

Var multi_head(Graph& g, const LayerParams& p, Var x_q, Var x_kv,
               const std::vector<std::uint8_t>* key_mask) {
  if (g.value(x_q).cols() != p.dim || g.value(x_kv).cols() != p.dim) {
    throw ShapeError("multi_head: input width does not match layer dim");
  }
  Var q = g.add_row_broadcast(g.matmul(x_q, g.param(*p.wq)), g.param(*p.bq));
  Var k = g.add_row_broadcast(g.matmul(x_kv, g.param(*p.wk)), g.param(*p.bk));
  Var v = g.add_row_broadcast(g.matmul(x_kv, g.param(*p.wv)), g.param(*p.bv));
  const int dk = p.dim / p.heads;
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Var qh = g.slice_cols(q, h * dk, dk);
    Var kh = g.slice_cols(k, h * dk, dk);
    Var vh = g.slice_cols(v, h * dk, dk);
    heads.push_back(attn(g, qh, kh, vh, key_mask));
  }
  Var cat = p.heads == 1 ? heads[0] : g.concat_cols(heads);
  return g.add_row_broadcast(g.matmul(cat, g.param(*p.wo)), g.param(*p.bo));
}

namespace {

Var feed_forward(Graph& g, const LayerParams& p, Var x) {
  Var h = g.relu(g.add_row_broadcast(g.matmul(x, g.param(*p.ff_w1)),
                                     g.param(*p.ff_b1)));
  return g.add_row_broadcast(g.matmul(h, g.param(*p.ff_w2)),
                             g.param(*p.ff_b2));
}

}  // namespace

Var cross_layer(Graph& g, const LayerParams& p, Var x, Var ctx,
                const std::vector<std::uint8_t>* key_mask) {
  Var xn = g.layer_norm_rows(x, g.param(*p.ln_q_gain), g.param(*p.ln_q_offset));
  Var cn = g.layer_norm_rows(ctx, g.param(*p.ln_kv_gain),
                             g.param(*p.ln_kv_offset));
  Var a = g.add(x, multi_head(g, p, xn, cn, key_mask));
  Var an = g.layer_norm_rows(a, g.param(*p.ln_ff_gain),
                             g.param(*p.ln_ff_offset));
  return g.add(a, feed_forward(g, p, an));
}

Var self_layer(Graph& g, const LayerParams& p, Var x,
               const std::vector<std::uint8_t>* key_mask) {
  return cross_layer(g, p, x, x, key_mask);
}

}  // namespace skvg
