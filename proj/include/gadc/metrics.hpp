// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Masked depth metrics: RMSE, REL, MAE, and threshold percentages with
// strict comparison.

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "gadc/geometry.hpp"

namespace gadc {

struct Metrics {
  double rmse = 0, rel = 0, mae = 0;
  double d105 = 0, d110 = 0, d125 = 0;  // percentages

  Metrics& operator+=(const Metrics& o) {
    rmse += o.rmse;
    rel += o.rel;
    mae += o.mae;
    d105 += o.d105;
    d110 += o.d110;
    d125 += o.d125;
    return *this;
  }

  Metrics& operator/=(double n) {
    rmse /= n;
    rel /= n;
    mae /= n;
    d105 /= n;
    d110 /= n;
    d125 /= n;
    return *this;
  }

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << rmse << "," << rel << "," << mae << "," << d105 << "," << d110 << ","
       << d125;
    return os.str();
  }

  static const char* csv_header() {
    return "rmse,rel,mae,delta_1.05,delta_1.10,delta_1.25";
  }
};

// All statistics over masked pixels only; thresholds use strict < so a
// ratio exactly at the boundary does not count.
inline Metrics compute_metrics(const DepthMap& pred, const DepthMap& gt,
                               const std::vector<std::uint8_t>& mask) {
  if (pred.height() != gt.height() || pred.width() != gt.width() ||
      mask.size() != gt.values().size())
    throw input_error("metrics: shape mismatch");
  double se = 0, rel = 0, ae = 0;
  std::size_t n = 0, c105 = 0, c110 = 0, c125 = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double g = gt.values()[i];
    if (!(g > 0.0)) throw input_error("metrics: ground truth is 0 inside mask");
    const double p = pred.values()[i];
    const double err = p - g;
    se += err * err;
    ae += std::abs(err);
    rel += std::abs(err) / g;
    const double ratio = p > 0.0 ? std::max(p / g, g / p)
                                 : std::numeric_limits<double>::infinity();
    if (ratio < 1.05) ++c105;
    if (ratio < 1.10) ++c110;
    if (ratio < 1.25) ++c125;
    ++n;
  }
  if (n == 0) throw input_error("metrics: empty mask");
  Metrics m;
  const double dn = static_cast<double>(n);
  m.rmse = std::sqrt(se / dn);
  m.rel = rel / dn;
  m.mae = ae / dn;
  m.d105 = 100.0 * static_cast<double>(c105) / dn;
  m.d110 = 100.0 * static_cast<double>(c110) / dn;
  m.d125 = 100.0 * static_cast<double>(c125) / dn;
  return m;
}

}  // namespace gadc
