// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Point completion: farthest-point sampling order, the Chamfer objective
// against hand-computed values, and the zero-initialized movement head.

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "gadc/point_completion.hpp"

namespace {

using namespace gadc;
using P3 = std::array<double, 3>;

TEST(PointBranch, FpsPicksExtremesOnALine) {
  // ten points on a line: start at index 0, then the far end, then the middle
  std::vector<P3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({double(i), 0, 0});
  auto picked = farthest_point_sample(pts, 3);
  ASSERT_EQ(picked.size(), 3u);
  EXPECT_EQ(picked[0], 0u);
  EXPECT_EQ(picked[1], 9u);
  EXPECT_EQ(picked[2], 4u);  // 4 and 5 tie at distance 4^2; lower index wins
}

TEST(PointBranch, FpsMaxMinDistanceIsMonotonicallyReasonable) {
  Rng rng(31);
  std::vector<P3> pts(200);
  for (auto& p : pts)
    p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  auto picked = farthest_point_sample(pts, 50);
  // no index may repeat when n > n_fixed
  std::vector<std::size_t> sorted = picked;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_TRUE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST(PointBranch, FpsReplicatesCyclicallyWhenShort) {
  std::vector<P3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  auto picked = farthest_point_sample(pts, 5);
  const std::vector<std::size_t> want{0, 1, 2, 0, 1};
  ASSERT_EQ(picked.size(), 5u);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(picked[i], want[i]);
}

TEST(PointBranch, ChamferHandComputedValue) {
  // A = {(0,0,0), (2,0,0)}, B = {(1,0,0)}
  // every a's nearest b: distances^2 = 1, 1 -> mean 1
  // every b's nearest a: distance^2 = 1 -> mean 1; total = 2
  auto a = Tensor<double>::from_data({2, 3}, {0, 0, 0, 2, 0, 0});
  auto b = Tensor<double>::from_data({1, 3}, {1, 0, 0});
  auto d = chamfer(a, b);
  EXPECT_NEAR(d.item(), 2.0, 1e-12);
}

TEST(PointBranch, ChamferZeroOnIdenticalClouds) {
  Rng rng(32);
  std::vector<double> v(30);
  for (auto& x : v) x = rng.uniform(-1, 1);
  auto a = Tensor<double>::from_data({10, 3}, v);
  auto b = Tensor<double>::from_data({10, 3}, v);
  EXPECT_EQ(chamfer(a, b).item(), 0.0);
}

TEST(PointBranch, ChamferIsSymmetricUnderSwap) {
  Rng rng(33);
  std::vector<double> va(24), vb(18);
  for (auto& x : va) x = rng.uniform(-1, 1);
  for (auto& x : vb) x = rng.uniform(-1, 1);
  auto a = Tensor<double>::from_data({8, 3}, va);
  auto b = Tensor<double>::from_data({6, 3}, vb);
  EXPECT_DOUBLE_EQ(chamfer(a, b).item(), chamfer(b, a).item());
}

TEST(PointBranch, ChamferGradientMovesPointsTogether) {
  auto a = Tensor<double>::from_data({1, 3}, {1, 0, 0});
  auto b = Tensor<double>::from_data({1, 3}, {0, 0, 0});
  a.set_requires_grad(true);
  auto d = chamfer(a, b);
  d.backward();
  // d = 2 * (1)^2, dd/da_x = 2*2*(a_x - b_x)/1... both directions hit the
  // same pair, so the gradient is 2*(a-b) from each term = (4, 0, 0)
  EXPECT_NEAR(a.grad()[0], 4.0, 1e-12);
  EXPECT_NEAR(a.grad()[1], 0.0, 1e-12);
}

TEST(PointBranch, UntrainedStepIsIdentity) {
  ParamStore<float> ps;
  Rng rng(34);
  PmdStep<float> step(ps, "s", 3, 16, rng);
  std::vector<float> v(12);
  Rng data_rng(35);
  for (auto& x : v) x = static_cast<float>(data_rng.uniform(-1, 1));
  auto pos = Tensor<float>::from_data({4, 3}, v);
  auto out = step.forward(pos, nullptr);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(out.displacement.vals()[i], 0.0f);
    EXPECT_EQ(out.moved.vals()[i], pos.vals()[i]);
  }
}

TEST(PointBranch, CompletionChainsThreeSteps) {
  ParamStore<float> ps;
  Rng rng(36);
  PointBranch<float> branch(ps, "pb", 8, rng);
  std::vector<float> v(30);
  Rng data_rng(37);
  for (auto& x : v) x = static_cast<float>(data_rng.uniform(-1, 1));
  auto pos = Tensor<float>::from_data({10, 3}, v);
  const auto before = pmd_step_counter().load();
  auto steps = branch.complete(pos);
  EXPECT_EQ(pmd_step_counter().load() - before, 3u);
  ASSERT_EQ(steps.size(), 3u);
  for (const auto& s : steps) {
    EXPECT_EQ(s.moved.dim(0), 10u);
    EXPECT_EQ(s.moved.dim(1), 3u);
    EXPECT_EQ(s.features.dim(1), 8u);
  }
  // zero-initialized heads: every stage's positions equal the input
  for (std::size_t i = 0; i < 30; ++i)
    EXPECT_EQ(steps[2].moved.vals()[i], pos.vals()[i]);
}

TEST(PointBranch, GlobalFeatureIsPermutationInvariant) {
  ParamStore<double> ps;
  Rng rng(38);
  PmdStep<double> step(ps, "s", 3, 8, rng);
  std::vector<double> v(15);
  Rng data_rng(39);
  for (auto& x : v) x = data_rng.uniform(-1, 1);
  auto pos = Tensor<double>::from_data({5, 3}, v);
  // reversed row order
  std::vector<double> rv(15);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) rv[i * 3 + j] = v[(4 - i) * 3 + j];
  auto pos_r = Tensor<double>::from_data({5, 3}, rv);
  auto out = step.forward(pos, nullptr);
  auto out_r = step.forward(pos_r, nullptr);
  // per-point features of point p must not depend on the order of the others
  for (std::size_t j = 0; j < 8; ++j)
    EXPECT_NEAR(out.features.vals()[0 * 8 + j],
                out_r.features.vals()[4 * 8 + j], 1e-12);
}

TEST(PointBranch, SampleFixedKeepsPixelOrigins) {
  PointSet ps;
  for (int i = 0; i < 6; ++i) {
    ps.positions.push_back({double(i), 0, 0});
    ps.pixel_origin.push_back({i, i + 1});
  }
  PointSet fixed = sample_fixed(ps, 3);
  ASSERT_EQ(fixed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto x = fixed.positions[i][0];
    EXPECT_EQ(fixed.pixel_origin[i][0], static_cast<std::int64_t>(x));
    EXPECT_EQ(fixed.pixel_origin[i][1], static_cast<std::int64_t>(x) + 1);
  }
}

TEST(PointBranch, EmptyInputThrows) {
  EXPECT_THROW(farthest_point_sample({}, 4), input_error);
}

}  // namespace
