// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// The full depth-completion model: image branch, point branch, per-scale
// aggregation and fusion, and the cascaded three-stage prediction. Fusion
// per scale is off (image only), additive (a learned projection of the
// aggregated 3D features), or the full gated block.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gadc/aggregation.hpp"
#include "gadc/fusion.hpp"
#include "gadc/geometry.hpp"
#include "gadc/image_net.hpp"
#include "gadc/maps.hpp"
#include "gadc/point_completion.hpp"
#include "gadc/spatial.hpp"

namespace gadc {

enum class FuseMode { kOff, kAdd, kGcmf };

struct ModelConfig {
  std::size_t w_quarter = 32, w_half = 48, w_full = 64;
  std::size_t f_p = 64;
  std::size_t n_fixed = 2048;
  AcaConfig aca;
  std::array<FuseMode, 3> fuse{FuseMode::kGcmf, FuseMode::kGcmf,
                               FuseMode::kGcmf};  // quarter, half, full
  double max_depth = 3.0;
  bool layer_norm = true;

  bool point_branch_active() const {
    if (aca.strategy != QueryStrategy::kNone) return true;
    for (const auto m : fuse)
      if (m != FuseMode::kOff) return true;
    return false;
  }

  void validate() const {
    aca.validate();
    if (w_quarter == 0 || w_half == 0 || w_full == 0 || f_p == 0 ||
        n_fixed == 0)
      throw config_error("model: widths, f_p, and n_fixed must be positive");
    if (!(max_depth > 0)) throw config_error("model: max_depth must be positive");
  }
};

template <typename T>
struct Prediction {
  std::array<StageOutput<T>, 3> stages;  // quarter, half, full
  std::vector<PmdStepOutput<T>> point_steps;
  std::array<std::vector<std::uint8_t>, 3> fallback_masks;
};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng root(seed);
    // Each module draws from its own forked stream so configuration changes
    // elsewhere never shift another module's initialization.
    Rng r_ext = root.fork("extractor");
    extractor_ = FeatureExtractor<T>(params_, "ext", cfg.w_quarter, cfg.w_half,
                                     cfg.w_full, r_ext);
    const std::array<std::size_t, 3> widths{cfg.w_quarter, cfg.w_half,
                                            cfg.w_full};
    const std::array<const char*, 3> tag{"q", "h", "f"};
    for (std::size_t s = 0; s < 3; ++s) {
      Rng r_hg = root.fork(std::string("hourglass.") + tag[s]);
      hourglass_[s] = Hourglass<T>(params_, std::string("hg.") + tag[s],
                                   widths[s], cfg.max_depth, r_hg);
      Rng r_gcmf = root.fork(std::string("gcmf.") + tag[s]);
      gcmf_[s] = GcmfBlock<T>(params_, std::string("gcmf.") + tag[s],
                              widths[s], cfg.f_p, r_gcmf, cfg.layer_norm);
      Rng r_aca = root.fork(std::string("aca.") + tag[s]);
      aca_[s] = AcaModule<T>(params_, std::string("aca.") + tag[s], cfg.f_p,
                             r_aca);
      // zero-initialized and bias-free: the projection contributes nothing
      // until training opens it, so this path starts as the plain image model
      add_proj_[s] = params_.zeros(std::string("add.") + tag[s] + ".W",
                                   {cfg.f_p, widths[s]});
    }
    Rng r_pb = root.fork("points");
    points_ = PointBranch<T>(params_, "pb", cfg.f_p, r_pb);
  }

  ParamStore<T>& params() { return params_; }
  const ModelConfig& config() const { return cfg_; }

  // rgb in [0,1]; raw depth in meters with 0 = hole. H, W must be divisible
  // by 16 so both hourglass levels stay aligned with their skip connections.
  Prediction<T> predict(const Tensor<T>& rgb, const DepthMap& raw,
                        const CameraModel& camera) const {
    const std::size_t h = raw.height(), w = raw.width();
    if (rgb.rank() != 3 || rgb.dim(0) != 3 || rgb.dim(1) != h ||
        rgb.dim(2) != w)
      throw input_error("predict: rgb shape does not match depth");
    if (h % 16 != 0 || w % 16 != 0)
      throw input_error("predict: H and W must be divisible by 16");
    if (camera.height != h || camera.width != w)
      throw input_error("predict: camera size does not match inputs");

    // Stage-1 reference: hole-filled raw depth, block-averaged to quarter
    // scale; its confidence proxy is the fraction of valid sensor pixels.
    const DepthMap filled = hole_fill_nearest(raw);
    const DepthMap ref_q = block_mean_downsample(filled, 4);
    const std::vector<double> conf_q = validity_fraction(raw, 4);

    Tensor<T> depth_in = depth_to_tensor(raw, T(1) / T(cfg_.max_depth));
    MultiScaleFeatures<T> feats = extractor_.forward(rgb, depth_in);

    Prediction<T> pred;
    PointSet cloud;
    std::optional<SpatialIndex> indices[3];
    PointSet moved[3];
    if (cfg_.point_branch_active()) {
      PointSet full_cloud = back_project(raw, camera);
      if (full_cloud.size() == 0) {
        // fully empty sensor input: fall back to a single point at the
        // camera-frame origin pushed to max depth so downstream shapes hold
        full_cloud.positions.push_back({0.0, 0.0, cfg_.max_depth});
      }
      cloud = sample_fixed(full_cloud, cfg_.n_fixed);
      Tensor<T> pos = positions_to_tensor(cloud);
      auto steps = points_.complete(pos);
      pred.point_steps.assign(steps.begin(), steps.end());
      for (std::size_t t = 0; t < 3; ++t) {
        moved[t] = tensor_to_positions(pred.point_steps[t].moved);
        indices[t].emplace(moved[t]);
      }
    }

    const std::array<std::size_t, 3> factor{4, 2, 1};
    const std::array<const Tensor<T>*, 3> scale_feats{&feats.quarter,
                                                      &feats.half, &feats.full};
    DepthMap ref = ref_q;
    std::vector<double> conf = conf_q;
    for (std::size_t s = 0; s < 3; ++s) {
      const CameraModel cam_s = scaled_camera(camera, 1.0 / factor[s]);
      Tensor<T> fused;
      const Tensor<T>* fused_ptr = nullptr;
      if (cfg_.fuse[s] != FuseMode::kOff) {
        AggregatedFeatureMap<T> agg = aca_[s].forward(
            ref, conf, cam_s, indices[s] ? &*indices[s] : nullptr, moved[s],
            indices[s] ? pred.point_steps[s].features : Tensor<T>(), cfg_.aca);
        pred.fallback_masks[s] = agg.fallback_mask;
        if (cfg_.fuse[s] == FuseMode::kGcmf) {
          fused = gcmf_[s].forward(*scale_feats[s], agg);
        } else {
          TokenMap<T> agg_tokens = tokenize(agg.values);
          TokenMap<T> projected{ops::matmul(agg_tokens.tokens, add_proj_[s]),
                                agg_tokens.h, agg_tokens.w};
          fused = ops::add(*scale_feats[s], detokenize(projected));
        }
        fused_ptr = &fused;
      }
      pred.stages[s] =
          hourglass_[s].forward(depth_to_tensor(ref, T(1)), *scale_feats[s],
                                fused_ptr);
      if (s < 2) {
        // next stage's reference: upsampled prediction and confidence
        Tensor<T> up_d = ops::resize_bilinear(pred.stages[s].depth, true);
        Tensor<T> up_c = ops::resize_bilinear(pred.stages[s].confidence, true);
        ref = tensor_to_depth(up_d);
        conf.assign(up_c.vals().begin(), up_c.vals().end());
      }
    }
    return pred;
  }

  static Tensor<T> depth_to_tensor(const DepthMap& d, T scale_by) {
    std::vector<T> v(d.values().size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = static_cast<T>(d.values()[i]) * scale_by;
    return Tensor<T>::from_data({1, d.height(), d.width()}, std::move(v));
  }

  static DepthMap tensor_to_depth(const Tensor<T>& t) {
    DepthMap d(t.dim(1), t.dim(2));
    for (std::size_t i = 0; i < t.numel(); ++i)
      d.values()[i] = static_cast<double>(t.vals()[i]);
    return d;
  }

  static Tensor<T> positions_to_tensor(const PointSet& ps) {
    std::vector<T> v;
    v.reserve(3 * ps.size());
    for (const auto& p : ps.positions)
      for (int c = 0; c < 3; ++c) v.push_back(static_cast<T>(p[c]));
    return Tensor<T>::from_data({ps.size(), 3}, std::move(v));
  }

  static PointSet tensor_to_positions(const Tensor<T>& t) {
    PointSet ps;
    ps.positions.resize(t.dim(0));
    for (std::size_t i = 0; i < t.dim(0); ++i)
      for (int c = 0; c < 3; ++c)
        ps.positions[i][c] = static_cast<double>(t.vals()[3 * i + c]);
    return ps;
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  FeatureExtractor<T> extractor_;
  std::array<Hourglass<T>, 3> hourglass_;
  std::array<GcmfBlock<T>, 3> gcmf_;
  std::array<AcaModule<T>, 3> aca_;
  std::array<Tensor<T>, 3> add_proj_;
  PointBranch<T> points_;
};

}  // namespace gadc
