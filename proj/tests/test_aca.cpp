// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Adaptive cross-attention aggregation: radius law, positional encoding,
// and the full per-pixel gather/attend/pool path against a hand-built oracle.

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "gadc/aggregation.hpp"

namespace {

using namespace gadc;

TEST(Aca, AdaptiveRadiusEndpoints) {
  EXPECT_DOUBLE_EQ(adaptive_radius(0.0, 0.05, 0.1), 0.10);
  EXPECT_DOUBLE_EQ(adaptive_radius(0.5, 0.05, 0.1), 0.075);
  EXPECT_DOUBLE_EQ(adaptive_radius(1.0, 0.05, 0.1), 0.05);
}

TEST(Aca, AdaptiveRadiusClampsConfidence) {
  EXPECT_DOUBLE_EQ(adaptive_radius(-3.0, 0.05, 0.1), 0.10);
  EXPECT_DOUBLE_EQ(adaptive_radius(7.5, 0.05, 0.1), 0.05);
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    const double c = rng.uniform(-2.0, 3.0);
    const double r = adaptive_radius(c, 0.05, 0.1);
    EXPECT_GE(r, 0.05);
    EXPECT_LE(r, 0.10);
  }
}

TEST(Aca, AdaptiveRadiusDecreasesWithConfidence) {
  double prev = adaptive_radius(0.0, 0.02, 0.3);
  for (double c = 0.05; c <= 1.0; c += 0.05) {
    const double r = adaptive_radius(c, 0.02, 0.3);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Aca, PositionEncodingHandExample) {
  const std::array<double, 3> xp{1, 2, 3}, xk{0, 2, 5};
  const auto e = position_encoding(xp, xk);
  const std::array<double, 10> want{1, 2, 3, 0, 2, 5, 1, 0, -2, std::sqrt(5.0)};
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(e[i], want[i]);
}

TEST(Aca, PositionEncodingOfSelfIsZeroTail) {
  const std::array<double, 3> xp{0.3, -0.7, 1.9};
  const auto e = position_encoding(xp, xp);
  for (int i = 6; i < 10; ++i) EXPECT_EQ(e[i], 0.0);
}

TEST(Aca, AggregateSumsWeightedRows) {
  auto f = Tensor<double>::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  auto w = Tensor<double>::from_data({3, 2}, {1, 0, 0.5, 1, 0, 0.25});
  auto a = aggregate(f, w);
  ASSERT_EQ(a.rank(), 1u);
  ASSERT_EQ(a.dim(0), 2u);
  EXPECT_DOUBLE_EQ(a.vals()[0], 1.0 * 1 + 0.5 * 3 + 0.0 * 5);
  EXPECT_DOUBLE_EQ(a.vals()[1], 0.0 * 2 + 1.0 * 4 + 0.25 * 6);
}

TEST(Aca, AttentionWeightsStayInUnitInterval) {
  ParamStore<double> ps;
  Rng rng(42);
  AcaModule<double> aca(ps, "aca", 6, rng);
  Rng data_rng(43);
  std::vector<double> fv(8 * 6), ev(8 * 10);
  for (auto& x : fv) x = data_rng.uniform(-2, 2);
  for (auto& x : ev) x = data_rng.uniform(-2, 2);
  auto w = aca.attention_weights(Tensor<double>::from_data({8, 6}, fv),
                                 Tensor<double>::from_data({8, 10}, ev));
  ASSERT_EQ(w.dim(0), 8u);
  ASSERT_EQ(w.dim(1), 6u);
  for (double x : w.vals()) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

CameraModel unit_camera(std::size_t h, std::size_t w) {
  CameraModel cam;
  cam.fx = cam.fy = 1.0;
  cam.cx = cam.cy = 0.0;
  cam.width = w;
  cam.height = h;
  cam.extrinsics = Mat4::identity();
  return cam;
}

// One valid pixel, two cloud points: replicate the gather/attend/pool chain
// by hand and demand exact agreement with the module.
TEST(Aca, SinglePixelForwardMatchesHandOracle) {
  const std::size_t f_p = 4;
  ParamStore<double> ps;
  Rng rng(44);
  AcaModule<double> aca(ps, "aca", f_p, rng);

  PointSet cloud;
  cloud.positions = {{0.0, 0.0, 0.95}, {0.02, 0.0, 1.0}};
  cloud.pixel_origin = {{0, 0}, {0, 0}};
  SpatialIndex index(cloud);

  Rng data_rng(45);
  std::vector<double> fv(2 * f_p);
  for (auto& x : fv) x = data_rng.uniform(-1, 1);
  auto feats = Tensor<double>::from_data({2, f_p}, fv);

  DepthMap depth(1, 1, 1.0);  // back-projects to (0, 0, 1)
  std::vector<double> conf{0.0};
  AcaConfig cfg;
  cfg.K = 2;
  cfg.r_min = 0.05;
  cfg.r_max = 0.1;
  cfg.strategy = QueryStrategy::kFixedBall;

  auto out = aca.forward(depth, conf, unit_camera(1, 1), &index, cloud, feats,
                         cfg);
  ASSERT_EQ(out.values.dim(0), f_p);
  EXPECT_EQ(out.fallback_mask[0], 0);

  // nearest-first neighbor order: point 1 at 0.02, then point 0 at 0.05
  const std::array<double, 3> xp{0, 0, 1};
  std::vector<double> enc;
  std::vector<std::size_t> order{1, 0};
  for (std::size_t k : order) {
    auto e = position_encoding(xp, cloud.positions[k]);
    enc.insert(enc.end(), e.begin(), e.end());
  }
  auto gathered = ops::gather_rows(feats, std::vector<std::size_t>(order));
  auto weights = aca.attention_weights(
      gathered, Tensor<double>::from_data({2, 10}, enc));
  auto pooled = aggregate(gathered, weights);
  for (std::size_t f = 0; f < f_p; ++f)
    EXPECT_DOUBLE_EQ(out.values.vals()[f], pooled.vals()[f]);
}

TEST(Aca, NoneStrategyYieldsZeroFeatures) {
  ParamStore<double> ps;
  Rng rng(46);
  AcaModule<double> aca(ps, "aca", 3, rng);
  DepthMap depth(2, 2, 1.0);
  depth.at(1, 1) = 0.0;  // one hole
  std::vector<double> conf(4, 0.5);
  AcaConfig cfg;
  cfg.strategy = QueryStrategy::kNone;
  auto out = aca.forward(depth, conf, unit_camera(2, 2), nullptr, PointSet{},
                         Tensor<double>{}, cfg);
  for (double x : out.values.vals()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(out.fallback_mask[0], 0);
  EXPECT_EQ(out.fallback_mask[3], 1);
}

TEST(Aca, EmptyBallMarksFallback) {
  ParamStore<double> ps;
  Rng rng(47);
  const std::size_t f_p = 3;
  AcaModule<double> aca(ps, "aca", f_p, rng);
  PointSet cloud;
  cloud.positions = {{5.0, 5.0, 5.0}};  // nowhere near the query
  cloud.pixel_origin = {{0, 0}};
  SpatialIndex index(cloud);
  auto feats = Tensor<double>::from_data({1, f_p}, {0.5, -0.5, 1.0});
  DepthMap depth(1, 1, 1.0);
  std::vector<double> conf{1.0};
  AcaConfig cfg;
  cfg.K = 4;
  auto out =
      aca.forward(depth, conf, unit_camera(1, 1), &index, cloud, feats, cfg);
  EXPECT_EQ(out.fallback_mask[0], 1);
}

TEST(Aca, HolePixelsGetZeroRowsAndFallback) {
  ParamStore<double> ps;
  Rng rng(48);
  AcaModule<double> aca(ps, "aca", 2, rng);
  PointSet cloud;
  cloud.positions = {{0, 0, 1.0}};
  cloud.pixel_origin = {{0, 0}};
  SpatialIndex index(cloud);
  auto feats = Tensor<double>::from_data({1, 2}, {1.0, 2.0});
  DepthMap depth(1, 2, 0.0);
  depth.at(0, 0) = 1.0;
  std::vector<double> conf{1.0, 1.0};
  AcaConfig cfg;
  cfg.K = 1;
  cfg.strategy = QueryStrategy::kKnn;
  auto out =
      aca.forward(depth, conf, unit_camera(1, 2), &index, cloud, feats, cfg);
  EXPECT_EQ(out.fallback_mask[0], 0);
  EXPECT_EQ(out.fallback_mask[1], 1);
  // feature layout is [F, H, W]; pixel (0,1) column must be zero
  EXPECT_EQ(out.values.vals()[1], 0.0);
  EXPECT_EQ(out.values.vals()[3], 0.0);
  EXPECT_NE(out.values.vals()[0], 0.0);
}

TEST(Aca, ConfigValidationRejectsBadRanges) {
  AcaConfig cfg;
  cfg.K = 0;
  EXPECT_THROW(cfg.validate(), config_error);
  cfg = AcaConfig{};
  cfg.r_min = 0.0;
  EXPECT_THROW(cfg.validate(), config_error);
  cfg = AcaConfig{};
  cfg.r_min = 0.2;
  cfg.r_max = 0.1;
  EXPECT_THROW(cfg.validate(), config_error);
  EXPECT_NO_THROW(AcaConfig{}.validate());
}

TEST(Aca, ForwardRejectsMismatchedInputs) {
  ParamStore<double> ps;
  Rng rng(49);
  AcaModule<double> aca(ps, "aca", 2, rng);
  PointSet cloud;
  cloud.positions = {{0, 0, 1.0}};
  cloud.pixel_origin = {{0, 0}};
  SpatialIndex index(cloud);
  auto feats = Tensor<double>::from_data({1, 2}, {1.0, 2.0});
  DepthMap depth(1, 1, 1.0);
  AcaConfig cfg;
  cfg.K = 1;
  // confidence length mismatch
  EXPECT_THROW(aca.forward(depth, {0.5, 0.5}, unit_camera(1, 1), &index, cloud,
                           feats, cfg),
               input_error);
  // camera scale mismatch
  EXPECT_THROW(aca.forward(depth, {0.5}, unit_camera(2, 2), &index, cloud,
                           feats, cfg),
               input_error);
  // missing index for a query strategy
  EXPECT_THROW(aca.forward(depth, {0.5}, unit_camera(1, 1), nullptr, cloud,
                           feats, cfg),
               config_error);
  // wrong feature width
  auto bad = Tensor<double>::from_data({1, 3}, {1.0, 2.0, 3.0});
  EXPECT_THROW(aca.forward(depth, {0.5}, unit_camera(1, 1), &index, cloud, bad,
                           cfg),
               input_error);
}

TEST(Aca, StrategyNamesRoundTrip) {
  for (auto s : {QueryStrategy::kNone, QueryStrategy::kKnn,
                 QueryStrategy::kFixedBall, QueryStrategy::kAdaptive})
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_THROW(parse_strategy("radius"), input_error);
}

TEST(Aca, ScaledCameraHalvesIntrinsics) {
  CameraModel cam = unit_camera(4, 6);
  cam.fx = 100;
  cam.fy = 90;
  cam.cx = 2.5;
  cam.cy = 1.5;
  CameraModel half = scaled_camera(cam, 0.5);
  EXPECT_EQ(half.width, 3u);
  EXPECT_EQ(half.height, 2u);
  EXPECT_DOUBLE_EQ(half.fx, 50.0);
  EXPECT_DOUBLE_EQ(half.fy, 45.0);
}

}  // namespace
