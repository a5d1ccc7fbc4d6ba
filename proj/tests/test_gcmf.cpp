// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Fusion blocks: token round trips, factorized attention against a direct
// quadratic oracle, gate-limit behavior of the convolutional GRU.

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gadc/fusion.hpp"

namespace {

using namespace gadc;

template <typename T>
Tensor<T> rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1,
                      double hi = 1) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from_data(std::move(shape), std::move(v));
}

TEST(Fusion, TokenizeLaysPixelsOutRowMajor) {
  // feat[c, v, u] = 100*c + 10*v + u
  std::vector<double> v;
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) v.push_back(100 * c + 10 * y + x);
  auto feat = Tensor<double>::from_data({2, 2, 3}, v);
  auto tm = tokenize(feat);
  ASSERT_EQ(tm.tokens.dim(0), 6u);
  ASSERT_EQ(tm.tokens.dim(1), 2u);
  // token for pixel (v=1, u=2) sits at row 5 and reads (12, 112)
  EXPECT_EQ(tm.tokens.vals()[5 * 2 + 0], 12.0);
  EXPECT_EQ(tm.tokens.vals()[5 * 2 + 1], 112.0);
  auto back = detokenize(tm);
  for (std::size_t i = 0; i < v.size(); ++i)
    EXPECT_EQ(back.vals()[i], v[i]);
}

TEST(Fusion, SoftmaxAttentionHandExample) {
  auto q = Tensor<double>::from_data({1, 2}, {1, 0});
  auto k = Tensor<double>::from_data({2, 2}, {1, 0, 0, 1});
  auto v = Tensor<double>::from_data({2, 2}, {5, 0, 0, 3});
  auto out = softmax_attention(q, k, v);
  const double s0 = std::exp(1.0 / std::sqrt(2.0));
  const double s1 = std::exp(0.0);
  const double w0 = s0 / (s0 + s1), w1 = s1 / (s0 + s1);
  EXPECT_NEAR(out.vals()[0], w0 * 5, 1e-12);
  EXPECT_NEAR(out.vals()[1], w1 * 3, 1e-12);
}

TEST(Fusion, LinearAttentionMatchesQuadraticOracle) {
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 7 + trial, m = 5 + 2 * trial, d = 4, dv = 3;
    auto q = rand_tensor<double>({n, d}, rng, -2, 2);
    auto k = rand_tensor<double>({m, d}, rng, -2, 2);
    auto v = rand_tensor<double>({m, dv}, rng, -2, 2);
    auto fast = linear_attention(q, k, v);
    auto phi = [](double x) { return (x > 0 ? x : std::expm1(x)) + 1.0; };
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> numer(dv, 0.0);
      double denom = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          s += phi(q.vals()[i * d + c]) * phi(k.vals()[j * d + c]);
        denom += s;
        for (std::size_t c = 0; c < dv; ++c)
          numer[c] += s * v.vals()[j * dv + c];
      }
      for (std::size_t c = 0; c < dv; ++c)
        EXPECT_NEAR(fast.vals()[i * dv + c], numer[c] / denom, 1e-10);
    }
  }
}

TEST(Fusion, SingleKeyValueShortCircuitsExactly) {
  Rng rng(52);
  auto q = rand_tensor<double>({6, 4}, rng, -3, 3);
  auto k = rand_tensor<double>({1, 4}, rng, -3, 3);
  auto v = rand_tensor<double>({1, 5}, rng, -3, 3);
  auto lin = linear_attention(q, k, v);
  auto soft = softmax_attention(q, k, v);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_EQ(lin.vals()[i * 5 + c], v.vals()[c]);
      EXPECT_EQ(soft.vals()[i * 5 + c], v.vals()[c]);
    }
  // and the result must not depend on q at all
  auto lin2 = linear_attention(rand_tensor<double>({6, 4}, rng), k, v);
  for (std::size_t i = 0; i < lin.numel(); ++i)
    EXPECT_EQ(lin.vals()[i], lin2.vals()[i]);
}

TEST(Fusion, LinearAttentionStaysInValueHull) {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(12), m = 2 + rng.below(12), dv = 3;
    auto q = rand_tensor<double>({n, 4}, rng, -2, 2);
    auto k = rand_tensor<double>({m, 4}, rng, -2, 2);
    auto v = rand_tensor<double>({m, dv}, rng, -2, 2);
    auto out = linear_attention(q, k, v);
    for (std::size_t c = 0; c < dv; ++c) {
      double lo = v.vals()[c], hi = v.vals()[c];
      for (std::size_t j = 1; j < m; ++j) {
        lo = std::min(lo, v.vals()[j * dv + c]);
        hi = std::max(hi, v.vals()[j * dv + c]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_GE(out.vals()[i * dv + c], lo - 1e-9);
        EXPECT_LE(out.vals()[i * dv + c], hi + 1e-9);
      }
    }
  }
}

TEST(Fusion, TinyDenominatorStaysFinite) {
  // phi(-40) ~ 4e-18, so every query/key score underflows the guard level
  auto q = Tensor<double>::from_data({2, 3}, std::vector<double>(6, -40.0));
  auto k = Tensor<double>::from_data({2, 3}, std::vector<double>(6, -40.0));
  auto v = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
  auto out = linear_attention(q, k, v);
  for (double x : out.vals()) EXPECT_TRUE(std::isfinite(x));
}

TEST(Fusion, SelfAttendNormalizesTokenRows) {
  ParamStore<double> ps;
  Rng rng(54);
  SelfAttend<double> sa(ps, "sa", 6, rng, true);
  TokenMap<double> in{rand_tensor<double>({10, 6}, rng), 2, 5};
  auto out = sa.forward(in);
  ASSERT_EQ(out.tokens.dim(0), 10u);
  ASSERT_EQ(out.tokens.dim(1), 6u);
  EXPECT_EQ(out.h, 2u);
  EXPECT_EQ(out.w, 5u);
  for (std::size_t i = 0; i < 10; ++i) {
    double mean = 0;
    for (std::size_t c = 0; c < 6; ++c) mean += out.tokens.vals()[i * 6 + c];
    EXPECT_NEAR(mean / 6.0, 0.0, 1e-9);
  }
}

TEST(Fusion, CrossAttendPassesThroughOnZeroMap) {
  ParamStore<double> ps;
  Rng rng(55);
  CrossAttend<double> ca(ps, "ca", 5, 3, rng);
  TokenMap<double> queries{rand_tensor<double>({8, 5}, rng), 2, 4};
  TokenMap<double> kv{Tensor<double>::zeros({8, 3}), 2, 4};
  auto out = ca.forward(queries, kv);
  // bias-free K/V projections: a zero 3D map adds exactly nothing
  for (std::size_t i = 0; i < out.tokens.numel(); ++i)
    EXPECT_EQ(out.tokens.vals()[i], queries.tokens.vals()[i]);
}

TEST(Fusion, CrossAttendRejectsGridMismatch) {
  ParamStore<double> ps;
  Rng rng(56);
  CrossAttend<double> ca(ps, "ca", 4, 4, rng);
  TokenMap<double> a{rand_tensor<double>({6, 4}, rng), 2, 3};
  TokenMap<double> b{rand_tensor<double>({6, 4}, rng), 3, 2};
  EXPECT_THROW(ca.forward(a, b), input_error);
}

TEST(Fusion, GruForcedZeroGateIsBitIdenticalToState) {
  ParamStore<float> ps;
  Rng rng(57);
  ConvGru<float> gru(ps, "gru", 4, rng);
  auto h = rand_tensor<float>({4, 5, 6}, rng);
  auto x = rand_tensor<float>({4, 5, 6}, rng);
  auto out = gru.forward(h, x, GruGate::kForceZero);
  ASSERT_EQ(out.numel(), h.numel());
  EXPECT_EQ(std::memcmp(out.vals().data(), h.vals().data(),
                        h.numel() * sizeof(float)),
            0);
}

TEST(Fusion, GruForcedOneGateIsBoundedCandidate) {
  ParamStore<float> ps;
  Rng rng(58);
  ConvGru<float> gru(ps, "gru", 3, rng);
  auto h = rand_tensor<float>({3, 4, 4}, rng, -5, 5);
  auto x = rand_tensor<float>({3, 4, 4}, rng, -5, 5);
  auto cand = gru.forward(h, x, GruGate::kForceOne);
  for (float v : cand.vals()) {
    EXPECT_GT(v, -1.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Fusion, GruLearnedOutputLiesBetweenGateLimits) {
  ParamStore<double> ps;
  Rng rng(59);
  ConvGru<double> gru(ps, "gru", 3, rng);
  auto h = rand_tensor<double>({3, 4, 5}, rng, -2, 2);
  auto x = rand_tensor<double>({3, 4, 5}, rng, -2, 2);
  auto z0 = gru.forward(h, x, GruGate::kForceZero);
  auto z1 = gru.forward(h, x, GruGate::kForceOne);
  auto mid = gru.forward(h, x, GruGate::kLearned);
  for (std::size_t i = 0; i < mid.numel(); ++i) {
    const double lo = std::min(z0.vals()[i], z1.vals()[i]);
    const double hi = std::max(z0.vals()[i], z1.vals()[i]);
    EXPECT_GE(mid.vals()[i], lo - 1e-12);
    EXPECT_LE(mid.vals()[i], hi + 1e-12);
  }
}

TEST(Fusion, GcmfBlockKeepsShapeAndGateZeroIsIdentity) {
  ParamStore<float> ps;
  Rng rng(60);
  GcmfBlock<float> block(ps, "g", 6, 4, rng);
  auto feat = rand_tensor<float>({6, 4, 4}, rng);
  AggregatedFeatureMap<float> agg;
  agg.values = rand_tensor<float>({4, 4, 4}, rng);
  agg.fallback_mask.assign(16, 0);
  auto out = block.forward(feat, agg);
  ASSERT_EQ(out.rank(), 3u);
  EXPECT_EQ(out.dim(0), 6u);
  EXPECT_EQ(out.dim(1), 4u);
  EXPECT_EQ(out.dim(2), 4u);
  auto frozen = block.forward(feat, agg, GruGate::kForceZero);
  EXPECT_EQ(std::memcmp(frozen.vals().data(), feat.vals().data(),
                        feat.numel() * sizeof(float)),
            0);
}

TEST(Fusion, GcmfBlockRejectsScaleMismatch) {
  ParamStore<float> ps;
  Rng rng(61);
  GcmfBlock<float> block(ps, "g", 4, 4, rng);
  auto feat = rand_tensor<float>({4, 4, 4}, rng);
  AggregatedFeatureMap<float> agg;
  agg.values = rand_tensor<float>({4, 2, 2}, rng);
  agg.fallback_mask.assign(4, 0);
  EXPECT_THROW(block.forward(feat, agg), input_error);
}

}  // namespace
