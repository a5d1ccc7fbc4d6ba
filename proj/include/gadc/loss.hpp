// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Joint training objective: per-scale masked L1 plus confidence regression
// on the image side, Chamfer plus displacement regularization on the point
// side, combined as L_I + lambda * L_P.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "gadc/geometry.hpp"
#include "gadc/image_net.hpp"
#include "gadc/point_completion.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

struct LossConfig {
  double lambda = 0.01;
  double tau = 0.05;   // meters, confidence target scale
  double beta = 0.01;  // displacement regularization
  std::array<double, 3> stage_weights{0.25, 0.5, 1.0};

  void validate() const {
    if (!(tau > 0)) throw config_error("loss: tau must be positive");
    if (lambda < 0 || beta < 0)
      throw config_error("loss: lambda and beta must be non-negative");
    for (const auto w : stage_weights)
      if (w < 0) throw config_error("loss: stage weights must be non-negative");
  }
};

template <typename T>
struct LossParts {
  Tensor<T> total;
  Tensor<T> image;  // L_I
  Tensor<T> point;  // L_P (undefined tensor when the point branch is off)
};

// One scale of L_I: masked L1 on depth plus 0.5 * masked MSE between the
// confidence and exp(-|err|/tau). The target is computed from detached
// predictions; gt must be valid (> 0) somewhere.
template <typename T>
Tensor<T> image_loss_at_scale(const StageOutput<T>& stage, const DepthMap& gt,
                              double tau) {
  const std::size_t h = stage.depth.dim(1), w = stage.depth.dim(2);
  if (gt.height() != h || gt.width() != w)
    throw input_error("loss: ground truth scale mismatch");
  const std::size_t hw = h * w;
  std::vector<T> gt_v(hw), mask_v(hw), target_v(hw);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < hw; ++i) {
    const double g = gt.values()[i];
    gt_v[i] = static_cast<T>(g);
    if (g > 0.0) {
      mask_v[i] = T(1);
      ++valid;
      const double err =
          std::abs(static_cast<double>(stage.depth.vals()[i]) - g);
      target_v[i] = static_cast<T>(std::exp(-err / tau));
    }
  }
  if (valid == 0) throw input_error("loss: no valid ground-truth pixels");
  const Shape shp{1, h, w};
  Tensor<T> gt_t = Tensor<T>::from_data(shp, std::move(gt_v));
  Tensor<T> mask = Tensor<T>::from_data(shp, std::move(mask_v));
  Tensor<T> target = Tensor<T>::from_data(shp, std::move(target_v));
  const T inv_n = T(1) / static_cast<T>(valid);
  Tensor<T> l1 = ops::scale(
      ops::sum_all(ops::mul(ops::abs_t(ops::sub(stage.depth, gt_t)), mask)),
      inv_n);
  Tensor<T> cerr = ops::sub(stage.confidence, target);
  Tensor<T> cmse =
      ops::scale(ops::sum_all(ops::mul(ops::square(cerr), mask)), inv_n);
  return ops::add(l1, ops::scale(cmse, T(0.5)));
}

// L_P: sum over steps of Chamfer(moved_t, gt_cloud) plus beta times the
// mean per-point squared displacement.
template <typename T>
Tensor<T> point_loss(const std::vector<PmdStepOutput<T>>& steps,
                     const Tensor<T>& gt_cloud, double beta) {
  if (steps.empty()) throw input_error("point loss: no step outputs");
  Tensor<T> acc;
  for (const auto& s : steps) {
    const T inv_n = T(1) / static_cast<T>(s.displacement.dim(0));
    Tensor<T> term = ops::add(
        chamfer(s.moved, gt_cloud),
        ops::scale(ops::sum_all(ops::square(s.displacement)),
                   static_cast<T>(beta) * inv_n));
    acc = acc.defined() ? ops::add(acc, term) : term;
  }
  return acc;
}

template <typename T>
LossParts<T> joint_loss(const std::array<StageOutput<T>, 3>& stages,
                        const std::array<DepthMap, 3>& gt_scales,
                        const std::vector<PmdStepOutput<T>>& point_steps,
                        const Tensor<T>& gt_cloud, const LossConfig& cfg) {
  LossParts<T> parts;
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor<T> term =
        ops::scale(image_loss_at_scale(stages[s], gt_scales[s], cfg.tau),
                   static_cast<T>(cfg.stage_weights[s]));
    parts.image = parts.image.defined() ? ops::add(parts.image, term) : term;
  }
  if (!point_steps.empty()) {
    parts.point = point_loss(point_steps, gt_cloud, cfg.beta);
    parts.total = ops::add(
        parts.image, ops::scale(parts.point, static_cast<T>(cfg.lambda)));
  } else {
    parts.total = parts.image;
  }
  return parts;
}

}  // namespace gadc
