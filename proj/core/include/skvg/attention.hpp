#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skvg/graph.hpp"

namespace skvg {

/// Encoded feature stream: (rows x d) values plus a per-row validity mask
/// used when the rows act as attention keys.
struct Features {
  Mat values;
  std::vector<std::uint8_t> mask;  // empty = all valid

  int rows() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

/// Scaled dot-product attention: Softmax(Q K^T / sqrt(Dk)) V.
/// Q and K must share width; K and V must share row count. An optional key
/// mask (size = K rows) removes padded keys from the softmax.
Var attn(Graph& g, Var q, Var k, Var v,
         const std::vector<std::uint8_t>* key_mask = nullptr);

/// Parameters of one pre-norm residual transformer block: multi-head
/// attention (query/key/value/output projections), a two-layer feed-forward,
/// and the three layer norms (query input, context input, feed-forward input).
struct LayerParams {
  int dim = 0;
  int heads = 0;
  int ff_dim = 0;

  Parameter* wq = nullptr;
  Parameter* bq = nullptr;
  Parameter* wk = nullptr;
  Parameter* bk = nullptr;
  Parameter* wv = nullptr;
  Parameter* bv = nullptr;
  Parameter* wo = nullptr;
  Parameter* bo = nullptr;
  Parameter* ln_q_gain = nullptr;
  Parameter* ln_q_offset = nullptr;
  Parameter* ln_kv_gain = nullptr;
  Parameter* ln_kv_offset = nullptr;
  Parameter* ln_ff_gain = nullptr;
  Parameter* ln_ff_offset = nullptr;
  Parameter* ff_w1 = nullptr;
  Parameter* ff_b1 = nullptr;
  Parameter* ff_w2 = nullptr;
  Parameter* ff_b2 = nullptr;

  /// Registers all block parameters under `prefix.` in the store.
  /// Throws ShapeError if dim is not divisible by heads.
  static LayerParams create(ParamStore& store, const std::string& prefix,
                            int dim, int heads, int ff_dim, Rng& rng,
                            double lr = 1.0);

  /// Re-binds an existing block (e.g. after checkpoint load).
  static LayerParams bind(ParamStore& store, const std::string& prefix,
                          int dim, int heads, int ff_dim);
};

/// Multi-head attention wrapper: h parallel attn heads over learned
/// projections, concatenated and output-projected. Output rows = x_q rows.
Var multi_head(Graph& g, const LayerParams& p, Var x_q, Var x_kv,
               const std::vector<std::uint8_t>* key_mask = nullptr);

/// Pre-norm residual block over multi_head(x, ctx) followed by feed-forward.
/// Output shape equals x's.
Var cross_layer(Graph& g, const LayerParams& p, Var x, Var ctx,
                const std::vector<std::uint8_t>* key_mask = nullptr);

/// Self-attention block: cross_layer with ctx = x.
Var self_layer(Graph& g, const LayerParams& p, Var x,
               const std::vector<std::uint8_t>* key_mask = nullptr);

}  // namespace skvg
