// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Raster utilities on depth maps: nearest-valid hole filling and block-mean
// downsampling used to build per-stage references and ground truth.

#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "gadc/geometry.hpp"

namespace gadc {

// Multi-source breadth-first fill: every zero pixel takes the value of the
// nearest valid pixel (4-connectivity, row-major tie order). A map with no
// valid pixels is returned unchanged.
inline DepthMap hole_fill_nearest(const DepthMap& in) {
  const std::size_t h = in.height(), w = in.width();
  DepthMap out = in;
  std::deque<std::size_t> frontier;
  std::vector<std::uint8_t> done(h * w, 0);
  for (std::size_t p = 0; p < h * w; ++p) {
    if (in.values()[p] > 0.0) {
      done[p] = 1;
      frontier.push_back(p);
    }
  }
  if (frontier.empty() || frontier.size() == h * w) return out;
  while (!frontier.empty()) {
    const std::size_t p = frontier.front();
    frontier.pop_front();
    const std::size_t r = p / w, c = p % w;
    const std::size_t nbs[4] = {r > 0 ? p - w : p, r + 1 < h ? p + w : p,
                                c > 0 ? p - 1 : p, c + 1 < w ? p + 1 : p};
    for (const std::size_t q : nbs) {
      if (done[q]) continue;
      done[q] = 1;
      out.values()[q] = out.values()[p];
      frontier.push_back(q);
    }
  }
  return out;
}

// Plain block mean over factor x factor tiles; dims must divide evenly.
inline DepthMap block_mean_downsample(const DepthMap& in, std::size_t factor) {
  if (factor == 0 || in.height() % factor != 0 || in.width() % factor != 0)
    throw input_error("block_mean_downsample: dims not divisible by factor");
  const std::size_t ho = in.height() / factor, wo = in.width() / factor;
  DepthMap out(ho, wo);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < ho; ++r)
    for (std::size_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < factor; ++i)
        for (std::size_t j = 0; j < factor; ++j)
          acc += in.at(r * factor + i, c * factor + j);
      out.at(r, c) = acc * inv;
    }
  return out;
}

// Block mean over valid (> 0) source pixels only; tiles with no valid pixel
// come out 0 (invalid). Used to build per-scale ground truth.
inline DepthMap masked_block_mean_downsample(const DepthMap& in,
                                             std::size_t factor) {
  if (factor == 0 || in.height() % factor != 0 || in.width() % factor != 0)
    throw input_error("masked_block_mean_downsample: dims not divisible by factor");
  const std::size_t ho = in.height() / factor, wo = in.width() / factor;
  DepthMap out(ho, wo);
  for (std::size_t r = 0; r < ho; ++r)
    for (std::size_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < factor; ++i)
        for (std::size_t j = 0; j < factor; ++j) {
          const double v = in.at(r * factor + i, c * factor + j);
          if (v > 0.0) {
            acc += v;
            ++n;
          }
        }
      out.at(r, c) = n ? acc / static_cast<double>(n) : 0.0;
    }
  return out;
}

// Fraction of valid (> 0) source pixels per tile, in [0,1].
inline std::vector<double> validity_fraction(const DepthMap& in,
                                             std::size_t factor) {
  if (factor == 0 || in.height() % factor != 0 || in.width() % factor != 0)
    throw input_error("validity_fraction: dims not divisible by factor");
  const std::size_t ho = in.height() / factor, wo = in.width() / factor;
  std::vector<double> out(ho * wo, 0.0);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < ho; ++r)
    for (std::size_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < factor; ++i)
        for (std::size_t j = 0; j < factor; ++j)
          acc += in.at(r * factor + i, c * factor + j) > 0.0 ? 1.0 : 0.0;
      out[r * wo + c] = acc * inv;
    }
  return out;
}

}  // namespace gadc
