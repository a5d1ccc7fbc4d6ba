// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient verification for scalar-valued closures.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "gadc/tensor.hpp"

namespace gadc {

// Compares tape gradients of `closure` against central differences over every
// coordinate of `inputs`. The closure must rebuild its graph on each call and
// read the current values of the input tensors. Returns the maximum relative
// error |a - n| / max(1, |a|, |n|).
inline double grad_check(const std::function<Tensor<double>()>& closure,
                         std::vector<Tensor<double>> inputs,
                         double h = 1e-4) {
  for (auto& in : inputs) in.set_requires_grad(true);

  const double y0 = closure().item();
  const double y1 = closure().item();
  if (std::memcmp(&y0, &y1, sizeof(double)) != 0)
    throw numeric_error("grad_check: closure is not deterministic");

  for (auto& in : inputs) in.zero_grad();
  auto loss = closure();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) {
    if (in.grad().empty())
      analytic.emplace_back(in.numel(), 0.0);
    else
      analytic.push_back(in.grad());
  }

  double max_rel = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& vals = inputs[t].vals_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double fp = closure().item();
      vals[i] = keep - h;
      const double fm = closure().item();
      vals[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[t][i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace gadc
