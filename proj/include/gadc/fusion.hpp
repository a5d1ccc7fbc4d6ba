// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Gated cross-modal fusion: linear self-attention over 2D tokens, linear
// cross-attention querying aggregated 3D features, and a convolutional GRU
// that gates the attended features into the 2D stream.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gadc/aggregation.hpp"
#include "gadc/nn.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

template <typename T>
struct TokenMap {
  Tensor<T> tokens;  // [H*W, d], row-major pixel order
  std::size_t h = 0, w = 0;
};

template <typename T>
TokenMap<T> tokenize(const Tensor<T>& feat) {
  if (feat.rank() != 3) throw input_error("tokenize: feature map must be [d,H,W]");
  const std::size_t d = feat.dim(0), h = feat.dim(1), w = feat.dim(2);
  TokenMap<T> out;
  out.tokens = ops::transpose2d(feat.reshape({d, h * w}));
  out.h = h;
  out.w = w;
  return out;
}

template <typename T>
Tensor<T> detokenize(const TokenMap<T>& tm) {
  const std::size_t d = tm.tokens.dim(1);
  return ops::transpose2d(tm.tokens).reshape({d, tm.h, tm.w});
}

template <typename T>
Tensor<T> softmax_attention(const Tensor<T>& q, const Tensor<T>& k,
                            const Tensor<T>& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 ||
      q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0))
    throw input_error("softmax_attention: shape mismatch");
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
  Tensor<T> scores = ops::scale(ops::matmul(q, ops::transpose2d(k)), inv_sqrt_d);
  return ops::matmul(ops::softmax(scores), v);
}

// O(N+M) attention with feature map phi(x) = elu(x) + 1. Key/value
// statistics are accumulated once and shared by all queries. A single
// key-value pair short-circuits to that value row (the normalized weight is
// exactly 1, so the output is constant in Q and K).
template <typename T>
Tensor<T> linear_attention(const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 ||
      q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0))
    throw input_error("linear_attention: shape mismatch");
  const std::size_t n = q.dim(0), m = k.dim(0), dv = v.dim(1);
  if (m == 1) return ops::tile_rows(v.reshape({dv}), n);
  const std::size_t d = q.dim(1);
  Tensor<T> phi_q = ops::add_scalar(ops::elu(q), T(1));
  Tensor<T> phi_k = ops::add_scalar(ops::elu(k), T(1));
  Tensor<T> kv = ops::matmul(ops::transpose2d(phi_k), v);       // [d, dv]
  Tensor<T> numer = ops::matmul(phi_q, kv);                     // [n, dv]
  Tensor<T> ksum = ops::sum_cols(phi_k);                        // [d]
  Tensor<T> denom =
      ops::matmul(phi_q, ksum.reshape({d, 1})).reshape({n});    // [n]
  bool degenerate = false;
  for (const T dv_ : denom.vals())
    if (dv_ < T(1e-12)) degenerate = true;
  if (degenerate) {
    std::vector<T> eps(n, T(0));
    for (std::size_t i = 0; i < n; ++i)
      if (denom.vals()[i] < T(1e-12)) eps[i] = T(1e-6);
    denom = ops::add(denom, Tensor<T>::from_data({n}, std::move(eps)));
  }
  return ops::div_rows(numer, denom);
}

// Self-attention with learned Q/K/V projections, residual add, and (by
// default) layer normalization over the channel axis.
template <typename T>
class SelfAttend {
 public:
  SelfAttend() = default;

  SelfAttend(ParamStore<T>& ps, const std::string& prefix, std::size_t d,
             Rng& rng, bool layer_norm = true)
      : wq_(ps, prefix + ".q", d, d, rng),
        wk_(ps, prefix + ".k", d, d, rng),
        wv_(ps, prefix + ".v", d, d, rng),
        layer_norm_(layer_norm) {}

  TokenMap<T> forward(const TokenMap<T>& in) const {
    Tensor<T> att = linear_attention(wq_.forward(in.tokens),
                                     wk_.forward(in.tokens),
                                     wv_.forward(in.tokens));
    Tensor<T> out = ops::add(in.tokens, att);
    if (layer_norm_) out = ops::layer_norm(out);
    return {out, in.h, in.w};
  }

 private:
  Linear<T> wq_, wk_, wv_;
  bool layer_norm_ = true;
};

// Cross-attention: queries from the 2D stream, keys/values projected from
// the aggregated 3D features. K/V projections carry no bias so an all-zero
// 3D map contributes exactly nothing and the queries pass through.
template <typename T>
class CrossAttend {
 public:
  CrossAttend() = default;

  CrossAttend(ParamStore<T>& ps, const std::string& prefix, std::size_t d,
              std::size_t f_p, Rng& rng)
      : wq_(ps, prefix + ".q", d, d, rng),
        wk_(ps, prefix + ".k", f_p, d, rng, /*with_bias=*/false),
        wv_(ps, prefix + ".v", f_p, d, rng, /*with_bias=*/false) {}

  TokenMap<T> forward(const TokenMap<T>& queries, const TokenMap<T>& kv) const {
    if (queries.h != kv.h || queries.w != kv.w)
      throw input_error("cross_attend: pixel grids do not match");
    Tensor<T> att = linear_attention(wq_.forward(queries.tokens),
                                     wk_.forward(kv.tokens),
                                     wv_.forward(kv.tokens));
    return {ops::add(queries.tokens, att), queries.h, queries.w};
  }

 private:
  Linear<T> wq_, wk_, wv_;
};

enum class GruGate { kLearned, kForceZero, kForceOne };

// Convolutional GRU fusing attended features x into hidden state h. The
// force modes are test hooks that pin the update gate; they return the exact
// gate-limit result (z=0 keeps h bit-identical, z=1 yields the candidate).
template <typename T>
class ConvGru {
 public:
  ConvGru() = default;

  ConvGru(ParamStore<T>& ps, const std::string& prefix, std::size_t d,
          Rng& rng)
      : conv_z_(ps, prefix + ".z", 2 * d, d, 3, 1, ops::Padding::kSame, rng),
        conv_r_(ps, prefix + ".r", 2 * d, d, 3, 1, ops::Padding::kSame, rng),
        conv_h_(ps, prefix + ".h", 2 * d, d, 3, 1, ops::Padding::kSame, rng) {
    // start with the update gate nearly closed (sigmoid(-2) ~ 0.12) so the
    // fused stream begins as a small perturbation of the image features and
    // opens only where the cross-modal candidate earns it
    Tensor<T> zk = ps.at(prefix + ".z.k");
    Tensor<T> zb = ps.at(prefix + ".z.b");
    std::fill(zk.vals_mut().begin(), zk.vals_mut().end(), T(0));
    std::fill(zb.vals_mut().begin(), zb.vals_mut().end(), T(-2));
  }

  Tensor<T> forward(const Tensor<T>& h, const Tensor<T>& x,
                    GruGate gate = GruGate::kLearned) const {
    ops::check_same_shape(h, x, "conv_gru");
    if (gate == GruGate::kForceZero) return h;
    Tensor<T> hx = ops::concat_chan(h, x);
    Tensor<T> r = ops::sigmoid(conv_r_.forward(hx));
    Tensor<T> cand =
        ops::tanh_act(conv_h_.forward(ops::concat_chan(ops::mul(r, h), x)));
    if (gate == GruGate::kForceOne) return cand;
    Tensor<T> z = ops::sigmoid(conv_z_.forward(hx));
    Tensor<T> one_minus_z = ops::add_scalar(ops::scale(z, T(-1)), T(1));
    return ops::add(ops::mul(one_minus_z, h), ops::mul(z, cand));
  }

 private:
  Conv<T> conv_z_, conv_r_, conv_h_;
};

// One fusion block at a single scale: tokenize, self-attend, cross-attend
// into the aggregated 3D features, then gate the result into the 2D stream.
template <typename T>
class GcmfBlock {
 public:
  GcmfBlock() = default;

  GcmfBlock(ParamStore<T>& ps, const std::string& prefix, std::size_t d,
            std::size_t f_p, Rng& rng, bool layer_norm = true)
      : self_(ps, prefix + ".self", d, rng, layer_norm),
        cross_(ps, prefix + ".cross", d, f_p, rng),
        gru_(ps, prefix + ".gru", d, rng) {}

  Tensor<T> forward(const Tensor<T>& feat2d,
                    const AggregatedFeatureMap<T>& agg3d,
                    GruGate gate = GruGate::kLearned) const {
    if (feat2d.rank() != 3 || agg3d.values.rank() != 3 ||
        agg3d.values.dim(1) != feat2d.dim(1) ||
        agg3d.values.dim(2) != feat2d.dim(2))
      throw input_error("gcmf_block: scale mismatch between 2D and 3D maps");
    TokenMap<T> t = tokenize(feat2d);
    TokenMap<T> kv = tokenize(agg3d.values);
    TokenMap<T> attended = cross_.forward(self_.forward(t), kv);
    return gru_.forward(feat2d, detokenize(attended), gate);
  }

 private:
  SelfAttend<T> self_;
  CrossAttend<T> cross_;
  ConvGru<T> gru_;
};

}  // namespace gadc
