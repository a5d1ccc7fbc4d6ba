// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Point-cloud completion branch: farthest-point sampling to a fixed size,
// three cascaded point-moving steps producing per-point features and
// displacements, and the Chamfer distance used to supervise them.

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gadc/geometry.hpp"
#include "gadc/nn.hpp"
#include "gadc/spatial.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

inline std::atomic<std::uint64_t>& pmd_step_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// Greedy farthest-point sampling started at index 0 (max-min distance,
// ties to the lower index). Inputs smaller than n_fixed replicate
// cyclically.
inline std::vector<std::size_t> farthest_point_sample(
    const std::vector<std::array<double, 3>>& pts, std::size_t n_fixed) {
  const std::size_t n = pts.size();
  if (n == 0) throw input_error("farthest_point_sample: empty input");
  std::vector<std::size_t> picked;
  picked.reserve(n_fixed);
  if (n <= n_fixed) {
    for (std::size_t i = 0; i < n_fixed; ++i) picked.push_back(i % n);
    return picked;
  }
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t cur = 0;
  picked.push_back(cur);
  for (std::size_t step = 1; step < n_fixed; ++step) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = detail::dist2(pts[i], pts[cur]);
      if (d < best[i]) best[i] = d;
      if (best[i] > far_d) {
        far_d = best[i];
        far = i;
      }
    }
    cur = far;
    picked.push_back(cur);
  }
  return picked;
}

inline PointSet sample_fixed(const PointSet& points, std::size_t n_fixed) {
  const auto idx = farthest_point_sample(points.positions, n_fixed);
  PointSet out;
  out.positions.reserve(n_fixed);
  for (const auto i : idx) {
    out.positions.push_back(points.positions[i]);
    if (!points.pixel_origin.empty())
      out.pixel_origin.push_back(points.pixel_origin[i]);
  }
  return out;
}

// Symmetric Chamfer distance between [Na,3] and [Nb,3] position tensors.
// Gradients flow to both sets through the matched pairs; the matching itself
// is treated as constant, ties to the lower index.
template <typename T>
Tensor<T> chamfer(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || a.dim(1) != 3 || b.rank() != 2 || b.dim(1) != 3)
    throw input_error("chamfer: inputs must be [N,3]");
  const std::size_t na = a.dim(0), nb = b.dim(0);
  if (na == 0 || nb == 0) throw input_error("chamfer: empty point set");
  const T* av = a.vals().data();
  const T* bv = b.vals().data();
  auto nn_a = std::make_shared<std::vector<std::size_t>>(na);
  auto nn_b = std::make_shared<std::vector<std::size_t>>(nb);
  auto d2 = [](const T* p, const T* q) {
    const T dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
    return dx * dx + dy * dy + dz * dz;
  };
  T cost_a = T(0);
  for (std::size_t i = 0; i < na; ++i) {
    T best = std::numeric_limits<T>::infinity();
    std::size_t bj = 0;
    for (std::size_t j = 0; j < nb; ++j) {
      const T d = d2(av + 3 * i, bv + 3 * j);
      if (d < best) {
        best = d;
        bj = j;
      }
    }
    (*nn_a)[i] = bj;
    cost_a += best;
  }
  T cost_b = T(0);
  for (std::size_t j = 0; j < nb; ++j) {
    T best = std::numeric_limits<T>::infinity();
    std::size_t bi = 0;
    for (std::size_t i = 0; i < na; ++i) {
      const T d = d2(av + 3 * i, bv + 3 * j);
      if (d < best) {
        best = d;
        bi = i;
      }
    }
    (*nn_b)[j] = bi;
    cost_b += best;
  }
  const T value = cost_a / static_cast<T>(na) + cost_b / static_cast<T>(nb);
  return Tensor<T>::make_op(
      {1}, {value}, {a.node(), b.node()},
      [na, nb, nn_a, nn_b](typename Tensor<T>::Node& n) {
        auto* pa = n.parents[0].get();
        auto* pb = n.parents[1].get();
        const T g = n.grad[0];
        const T ga = g * T(2) / static_cast<T>(na);
        const T gb = g * T(2) / static_cast<T>(nb);
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t i = 0; i < na; ++i) {
          const std::size_t j = (*nn_a)[i];
          for (int c = 0; c < 3; ++c) {
            const T diff = pa->value[3 * i + c] - pb->value[3 * j + c];
            if (pa->requires_grad) pa->grad[3 * i + c] += ga * diff;
            if (pb->requires_grad) pb->grad[3 * j + c] -= ga * diff;
          }
        }
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = (*nn_b)[j];
          for (int c = 0; c < 3; ++c) {
            const T diff = pb->value[3 * j + c] - pa->value[3 * i + c];
            if (pb->requires_grad) pb->grad[3 * j + c] += gb * diff;
            if (pa->requires_grad) pa->grad[3 * i + c] -= gb * diff;
          }
        }
      });
}

template <typename T>
struct PmdStepOutput {
  Tensor<T> features;      // [N, F_p]
  Tensor<T> displacement;  // [N, 3]
  Tensor<T> moved;         // [N, 3], previous positions + displacement
};

// One point-moving step: per-point encoder, global max-pool, propagation of
// the global feature to every point, trunk, and a zero-initialized
// displacement head so the untrained step is the identity.
template <typename T>
class PmdStep {
 public:
  PmdStep() = default;

  PmdStep(ParamStore<T>& ps, const std::string& prefix, std::size_t in_dim,
          std::size_t f_p, Rng& rng) {
    enc1_ = Linear<T>(ps, prefix + ".enc1", in_dim, f_p, rng);
    enc2_ = Linear<T>(ps, prefix + ".enc2", f_p, f_p, rng);
    trunk1_ = Linear<T>(ps, prefix + ".trunk1", 2 * f_p, f_p, rng);
    trunk2_ = Linear<T>(ps, prefix + ".trunk2", f_p, f_p, rng);
    head_W_ = ps.zeros(prefix + ".head.W", {f_p, 3});
    head_b_ = ps.zeros(prefix + ".head.b", {3});
  }

  PmdStepOutput<T> forward(const Tensor<T>& positions,
                           const Tensor<T>* prev_features) const {
    pmd_step_counter().fetch_add(1, std::memory_order_relaxed);
    const std::size_t n = positions.dim(0);
    Tensor<T> x = prev_features
                      ? ops::concat_cols(positions, *prev_features)
                      : positions;
    x = ops::elu(enc1_.forward(x));
    x = ops::elu(enc2_.forward(x));
    Tensor<T> global = ops::max_cols(x);
    Tensor<T> prop = ops::concat_cols(x, ops::tile_rows(global, n));
    Tensor<T> feat = ops::elu(trunk1_.forward(prop));
    feat = ops::elu(trunk2_.forward(feat));
    PmdStepOutput<T> out;
    out.features = feat;
    out.displacement = ops::dense(feat, head_W_, head_b_);
    out.moved = positions + out.displacement;
    return out;
  }

 private:
  Linear<T> enc1_, enc2_, trunk1_, trunk2_;
  Tensor<T> head_W_, head_b_;
};

template <typename T>
class PointBranch {
 public:
  PointBranch() = default;

  PointBranch(ParamStore<T>& ps, const std::string& prefix, std::size_t f_p,
              Rng& rng) {
    steps_.emplace_back(ps, prefix + ".step0", 3, f_p, rng);
    steps_.emplace_back(ps, prefix + ".step1", 3 + f_p, f_p, rng);
    steps_.emplace_back(ps, prefix + ".step2", 3 + f_p, f_p, rng);
  }

  // Three chained steps; step t consumes the previous step's moved positions
  // and features. Step t's features feed the fusion block at scale
  // 1/4 (t=0), 1/2 (t=1), 1/1 (t=2).
  std::array<PmdStepOutput<T>, 3> complete(const Tensor<T>& positions) const {
    std::array<PmdStepOutput<T>, 3> outs;
    outs[0] = steps_[0].forward(positions, nullptr);
    outs[1] = steps_[1].forward(outs[0].moved, &outs[0].features);
    outs[2] = steps_[2].forward(outs[1].moved, &outs[1].features);
    return outs;
  }

  const PmdStep<T>& step(std::size_t t) const { return steps_[t]; }

 private:
  std::vector<PmdStep<T>> steps_;
};

}  // namespace gadc
