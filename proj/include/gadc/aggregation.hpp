// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Adaptive correlation aggregation: every pixel of a reference depth map is
// lifted to 3D, queries the completed point cloud with a confidence-adaptive
// radius, and pools neighbor features with position-encoded attention
// weights into a dense 2D map. Gradients flow only through neighbor features
// and the weight MLPs; reference geometry and neighbor selection are fixed.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gadc/geometry.hpp"
#include "gadc/nn.hpp"
#include "gadc/spatial.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

enum class QueryStrategy { kNone, kKnn, kFixedBall, kAdaptive };

inline QueryStrategy parse_strategy(const std::string& s) {
  if (s == "none") return QueryStrategy::kNone;
  if (s == "knn") return QueryStrategy::kKnn;
  if (s == "ball") return QueryStrategy::kFixedBall;
  if (s == "adaptive") return QueryStrategy::kAdaptive;
  throw input_error("unknown query strategy: " + s);
}

inline const char* strategy_name(QueryStrategy s) {
  switch (s) {
    case QueryStrategy::kNone: return "none";
    case QueryStrategy::kKnn: return "knn";
    case QueryStrategy::kFixedBall: return "ball";
    case QueryStrategy::kAdaptive: return "adaptive";
  }
  return "?";
}

struct AcaConfig {
  std::size_t K = 16;
  double r_min = 0.05;
  double r_max = 0.1;
  QueryStrategy strategy = QueryStrategy::kAdaptive;

  void validate() const {
    if (K < 1) throw config_error("aca: K must be at least 1");
    if (!(r_min > 0.0) || !(r_min < r_max))
      throw config_error("aca: need 0 < r_min < r_max");
  }
};

// Confidence-adaptive query radius; confidence is clamped to [0,1] first.
inline double adaptive_radius(double c, double r_min, double r_max) {
  c = std::min(1.0, std::max(0.0, c));
  return c * r_min + (1.0 - c) * r_max;
}

// concat(X_p, X_p^k, X_p - X_p^k, |X_p - X_p^k|)
inline std::array<double, 10> position_encoding(
    const std::array<double, 3>& xp, const std::array<double, 3>& xk) {
  std::array<double, 10> e{};
  double n2 = 0;
  for (int c = 0; c < 3; ++c) {
    e[c] = xp[c];
    e[3 + c] = xk[c];
    e[6 + c] = xp[c] - xk[c];
    n2 += e[6 + c] * e[6 + c];
  }
  e[9] = std::sqrt(n2);
  return e;
}

// Sum over K of w (x) F for one pixel's neighborhood.
template <typename T>
Tensor<T> aggregate(const Tensor<T>& features, const Tensor<T>& weights) {
  ops::check_same_shape(features, weights, "aggregate");
  return ops::sum_cols(ops::mul(weights, features));
}

template <typename T>
struct AggregatedFeatureMap {
  Tensor<T> values;                        // [F_p, H, W]
  std::vector<std::uint8_t> fallback_mask; // H*W, 1 = empty-ball fallback
};

template <typename T>
class AcaModule {
 public:
  AcaModule() = default;

  AcaModule(ParamStore<T>& ps, const std::string& prefix, std::size_t f_p,
            Rng& rng)
      : f_p_(f_p),
        mlp_b_(ps, prefix + ".pos", {10, 32, f_p}, rng, Act::kElu, Act::kNone),
        mlp_a_(ps, prefix + ".att", {2 * f_p, f_p}, rng, Act::kElu,
               Act::kNone) {}

  std::size_t feature_dim() const { return f_p_; }

  // w = sigmoid(MLP_a(concat(F_p^k, MLP_b(P_I^k)))), one weight per feature
  // channel per neighbor.
  Tensor<T> attention_weights(const Tensor<T>& neighbor_features,
                              const Tensor<T>& encodings) const {
    if (neighbor_features.rank() != 2 || encodings.rank() != 2 ||
        neighbor_features.dim(0) != encodings.dim(0) ||
        encodings.dim(1) != 10 || neighbor_features.dim(1) != f_p_)
      throw input_error("attention_weights: shape mismatch");
    Tensor<T> pos = mlp_b_.forward(encodings);
    return ops::sigmoid(
        mlp_a_.forward(ops::concat_cols(neighbor_features, pos)));
  }

  // Dense aggregation over every pixel of the reference depth at one scale.
  // `cloud` holds the (detached) completed point positions behind `index`;
  // `point_features` is the differentiable [N, F_p] feature tensor.
  AggregatedFeatureMap<T> forward(const DepthMap& prev_depth,
                                  const std::vector<double>& prev_conf,
                                  const CameraModel& cam_s,
                                  const SpatialIndex* index,
                                  const PointSet& cloud,
                                  const Tensor<T>& point_features,
                                  const AcaConfig& cfg) const {
    cfg.validate();
    const std::size_t h = prev_depth.height(), w = prev_depth.width();
    const std::size_t hw = h * w;
    if (prev_conf.size() != hw)
      throw input_error("aca: confidence map size mismatch");
    if (cam_s.height != h || cam_s.width != w)
      throw input_error("aca: camera scale does not match depth map");

    AggregatedFeatureMap<T> out;
    out.fallback_mask.assign(hw, 0);

    if (cfg.strategy == QueryStrategy::kNone) {
      for (std::size_t p = 0; p < hw; ++p)
        if (prev_depth.values()[p] <= 0.0) out.fallback_mask[p] = 1;
      out.values = Tensor<T>::zeros({f_p_, h, w});
      return out;
    }

    if (index == nullptr || cloud.size() == 0)
      throw config_error("aca: spatial index required for query strategies");
    if (point_features.rank() != 2 || point_features.dim(1) != f_p_ ||
        point_features.dim(0) != cloud.size())
      throw input_error("aca: point feature shape mismatch");

    const std::size_t K = cfg.K;
    const Mat4 lift = cam_s.extrinsics.inverse() * cam_s.intrinsics().inverse();
    std::vector<std::size_t> gather_idx(hw * K, 0);
    std::vector<T> enc(hw * K * 10, T(0));
    std::vector<T> row_mask(hw * f_p_, T(0));

    for (std::size_t v = 0; v < h; ++v) {
      for (std::size_t u = 0; u < w; ++u) {
        const std::size_t p = v * w + u;
        const double d = prev_depth.at(v, u);
        if (d <= 0.0) {
          out.fallback_mask[p] = 1;
          continue;  // zero features, indices stay 0 but the row is masked
        }
        const auto q = lift.apply({static_cast<double>(u) * d,
                                   static_cast<double>(v) * d, d, 1.0});
        const std::array<double, 3> xp{q[0] / q[3], q[1] / q[3], q[2] / q[3]};
        NeighborList nb;
        switch (cfg.strategy) {
          case QueryStrategy::kKnn:
            nb = index->knn_query(xp, K);
            break;
          case QueryStrategy::kFixedBall:
            nb = index->ball_query(xp, cfg.r_max, K);
            break;
          default:
            nb = index->ball_query(
                xp, adaptive_radius(prev_conf[p], cfg.r_min, cfg.r_max), K);
            break;
        }
        if (nb.out_of_ball) out.fallback_mask[p] = 1;
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t ni = nb.indices[k];
          gather_idx[p * K + k] = ni;
          const auto& xk = cloud.positions[ni];
          T* e = enc.data() + (p * K + k) * 10;
          for (int c = 0; c < 3; ++c) {
            e[c] = static_cast<T>(xp[c]);
            e[3 + c] = static_cast<T>(xk[c]);
            e[6 + c] = static_cast<T>(xp[c] - xk[c]);
          }
          e[9] = static_cast<T>(nb.distances[k]);
        }
        for (std::size_t f = 0; f < f_p_; ++f) row_mask[p * f_p_ + f] = T(1);
      }
    }

    Tensor<T> encodings = Tensor<T>::from_data({hw * K, 10}, std::move(enc));
    Tensor<T> gathered = ops::gather_rows(point_features, std::move(gather_idx));
    Tensor<T> weights = attention_weights(gathered, encodings);
    Tensor<T> pooled =
        ops::sum_mid(ops::mul(weights, gathered).reshape({hw, K, f_p_}));
    Tensor<T> mask = Tensor<T>::from_data({hw, f_p_}, std::move(row_mask));
    Tensor<T> masked = ops::mul(pooled, mask);
    out.values = ops::transpose2d(masked).reshape({f_p_, h, w});
    return out;
  }

 private:
  std::size_t f_p_ = 0;
  Mlp<T> mlp_b_;  // position encoding 10 -> 32 -> F_p
  Mlp<T> mlp_a_;  // concat(F, pos) 2F_p -> F_p, linear before the sigmoid
};

// Intrinsics and image size scaled by s (1, 1/2, 1/4); extrinsics unchanged.
inline CameraModel scaled_camera(const CameraModel& cam, double s) {
  CameraModel out = cam;
  out.fx = cam.fx * s;
  out.fy = cam.fy * s;
  out.cx = cam.cx * s;
  out.cy = cam.cy * s;
  out.width = static_cast<std::size_t>(std::lround(cam.width * s));
  out.height = static_cast<std::size_t>(std::lround(cam.height * s));
  return out;
}

}  // namespace gadc
