// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Image branch: residual RGB-D feature extractor with full/half/quarter
// taps, and the per-stage hourglass producing depth and confidence. The
// depth head predicts a residual on top of the (fixed) reference depth so an
// untrained stage starts near its reference.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gadc/nn.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

template <typename T>
class ResBlock {
 public:
  ResBlock() = default;

  ResBlock(ParamStore<T>& ps, const std::string& prefix, std::size_t w,
           Rng& rng)
      : c1_(ps, prefix + ".c1", w, w, 3, 1, ops::Padding::kSame, rng),
        c2_(ps, prefix + ".c2", w, w, 3, 1, ops::Padding::kSame, rng) {}

  Tensor<T> forward(const Tensor<T>& x) const {
    return ops::elu(ops::add(x, c2_.forward(ops::elu(c1_.forward(x)))));
  }

 private:
  Conv<T> c1_, c2_;
};

template <typename T>
struct MultiScaleFeatures {
  Tensor<T> full;     // [w_full, H, W]
  Tensor<T> half;     // [w_half, H/2, W/2]
  Tensor<T> quarter;  // [w_quarter, H/4, W/4]
};

// 4-channel (RGB + normalized raw depth) residual trunk with taps at
// strides 1, 2, 4.
template <typename T>
class FeatureExtractor {
 public:
  FeatureExtractor() = default;

  FeatureExtractor(ParamStore<T>& ps, const std::string& prefix,
                   std::size_t w_quarter, std::size_t w_half,
                   std::size_t w_full, Rng& rng)
      : stem_(ps, prefix + ".stem", 4, w_full, 3, 1, ops::Padding::kSame, rng),
        res_full_(ps, prefix + ".res1", w_full, rng),
        down1_(ps, prefix + ".down1", w_full, w_half, 3, 2, ops::Padding::kSame,
               rng),
        res_half_(ps, prefix + ".res2", w_half, rng),
        down2_(ps, prefix + ".down2", w_half, w_quarter, 3, 2,
               ops::Padding::kSame, rng),
        res_quarter_(ps, prefix + ".res3", w_quarter, rng) {}

  MultiScaleFeatures<T> forward(const Tensor<T>& rgb,
                                const Tensor<T>& depth_norm) const {
    if (rgb.rank() != 3 || rgb.dim(0) != 3)
      throw input_error("extract_features: rgb must be [3,H,W]");
    if (depth_norm.rank() != 3 || depth_norm.dim(0) != 1 ||
        depth_norm.dim(1) != rgb.dim(1) || depth_norm.dim(2) != rgb.dim(2))
      throw input_error("extract_features: depth must be [1,H,W] matching rgb");
    if (rgb.dim(1) % 4 != 0 || rgb.dim(2) % 4 != 0)
      throw input_error("extract_features: H and W must be divisible by 4");
    MultiScaleFeatures<T> out;
    Tensor<T> x = ops::concat_chan(rgb, depth_norm);
    out.full = res_full_.forward(ops::elu(stem_.forward(x)));
    out.half = res_half_.forward(ops::elu(down1_.forward(out.full)));
    out.quarter = res_quarter_.forward(ops::elu(down2_.forward(out.half)));
    return out;
  }

 private:
  Conv<T> stem_;
  ResBlock<T> res_full_;
  Conv<T> down1_;
  ResBlock<T> res_half_;
  Conv<T> down2_;
  ResBlock<T> res_quarter_;
};

template <typename T>
struct StageOutput {
  Tensor<T> depth;       // [1, h, w] meters, >= 0
  Tensor<T> confidence;  // [1, h, w] in [0, 1]
};

// Encoder-decoder with two downsamples, two upsamples, and skip
// connections; the decoder's last level consumes the fused cross-modal
// features when present. Heads: softplus depth residual anchored at the
// reference, sigmoid confidence.
template <typename T>
class Hourglass {
 public:
  Hourglass() = default;

  Hourglass(ParamStore<T>& ps, const std::string& prefix, std::size_t w,
            double max_depth, Rng& rng)
      : max_depth_(max_depth),
        enc0_(ps, prefix + ".enc0", w + 1, w, 3, 1, ops::Padding::kSame, rng),
        down1_(ps, prefix + ".down1", w, w, 3, 2, ops::Padding::kSame, rng),
        down2_(ps, prefix + ".down2", w, w, 3, 2, ops::Padding::kSame, rng),
        dec1_(ps, prefix + ".dec1", 2 * w, w, 3, 1, ops::Padding::kSame, rng),
        dec2_plain_(ps, prefix + ".dec2", 2 * w, w, 3, 1, ops::Padding::kSame,
                    rng),
        dec2_fused_(ps, prefix + ".dec2f", 3 * w, w, 3, 1, ops::Padding::kSame,
                    rng),
        depth_head_(ps, prefix + ".depth", w, 1, 3, 1, ops::Padding::kSame,
                    rng),
        conf_head_(ps, prefix + ".conf", w, 1, 3, 1, ops::Padding::kSame,
                   rng) {}

  // depth_ref is meters at this stage's scale; fused may be null.
  StageOutput<T> forward(const Tensor<T>& depth_ref, const Tensor<T>& features,
                         const Tensor<T>* fused) const {
    if (features.rank() != 3 || depth_ref.rank() != 3 ||
        depth_ref.dim(0) != 1 || depth_ref.dim(1) != features.dim(1) ||
        depth_ref.dim(2) != features.dim(2))
      throw input_error("hourglass_stage: reference/feature scale mismatch");
    if (fused && (fused->dim(1) != features.dim(1) ||
                  fused->dim(2) != features.dim(2)))
      throw input_error("hourglass_stage: fused feature scale mismatch");

    Tensor<T> ref_norm =
        ops::scale(depth_ref, static_cast<T>(1.0 / max_depth_));
    Tensor<T> e0 =
        ops::elu(enc0_.forward(ops::concat_chan(features, ref_norm)));
    Tensor<T> e1 = ops::elu(down1_.forward(e0));
    Tensor<T> e2 = ops::elu(down2_.forward(e1));
    Tensor<T> u1 = ops::elu(
        dec1_.forward(ops::concat_chan(ops::resize_bilinear(e2, true), e1)));
    Tensor<T> up = ops::concat_chan(ops::resize_bilinear(u1, true), e0);
    Tensor<T> u2 = fused
                       ? ops::elu(dec2_fused_.forward(
                             ops::concat_chan(up, *fused)))
                       : ops::elu(dec2_plain_.forward(up));

    // softplus(residual + softplus^-1(clamped reference)) starts the stage at
    // its reference depth; the anchor is constant, gradients take the
    // residual path.
    const auto& rv = ref_norm.vals();
    std::vector<T> anchor(rv.size());
    for (std::size_t i = 0; i < rv.size(); ++i) {
      const T c = std::clamp(rv[i], T(0.02), T(1.5));
      anchor[i] = std::log(std::expm1(c));
    }
    Tensor<T> offset = Tensor<T>::from_data(ref_norm.shape(), std::move(anchor));
    StageOutput<T> out;
    out.depth = ops::scale(
        ops::softplus(ops::add(depth_head_.forward(u2), offset)),
        static_cast<T>(max_depth_));
    out.confidence = ops::sigmoid(conf_head_.forward(u2));
    return out;
  }

 private:
  double max_depth_ = 3.0;
  Conv<T> enc0_, down1_, down2_, dec1_, dec2_plain_, dec2_fused_;
  Conv<T> depth_head_, conf_head_;
};

}  // namespace gadc
