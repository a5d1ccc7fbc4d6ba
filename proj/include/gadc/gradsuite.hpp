// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// The gradient verification suite: every differentiable op plus the fused
// attention, aggregation, and hourglass composites, each checked against
// central differences in double precision.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gadc/aggregation.hpp"
#include "gadc/fusion.hpp"
#include "gadc/gradcheck.hpp"
#include "gadc/image_net.hpp"
#include "gadc/nn.hpp"
#include "gadc/point_completion.hpp"
#include "gadc/tensor.hpp"

namespace gadc {

struct GradCaseResult {
  std::string name;
  double max_err = 0.0;
};

namespace detail {

inline Tensor<double> rand_tensor(Rng& rng, Shape shape, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from_data(std::move(shape), std::move(v));
}

// Values bounded away from zero so kinked ops (|x|, relu) see no sign
// flips within the finite-difference step.
inline Tensor<double> rand_offzero(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = rng.uniform(0.3, 1.0);
    if (rng.uniform() < 0.5) x = -x;
  }
  return Tensor<double>::from_data(std::move(shape), std::move(v));
}

}  // namespace detail

// Runs every case with the given seed; results carry the worst relative
// error per case.
inline std::vector<GradCaseResult> run_grad_suite(std::uint64_t seed) {
  using detail::rand_offzero;
  using detail::rand_tensor;
  std::vector<GradCaseResult> results;
  Rng root(seed);

  auto check = [&](const std::string& name,
                   const std::function<Tensor<double>()>& closure,
                   std::vector<Tensor<double>> inputs) {
    results.push_back({name, grad_check(closure, std::move(inputs))});
  };

  {
    Rng rng = root.fork("binary");
    auto a = rand_tensor(rng, {3, 4});
    auto b = rand_tensor(rng, {3, 4});
    auto d = rand_offzero(rng, {3, 4});
    check("add", [=] { return ops::sum_all(ops::add(a, b)); }, {a, b});
    check("sub", [=] { return ops::sum_all(ops::square(ops::sub(a, b))); },
          {a, b});
    check("mul", [=] { return ops::sum_all(ops::mul(a, b)); }, {a, b});
    check("div", [=] { return ops::sum_all(ops::div(a, d)); }, {a, d});
    check("scale", [=] { return ops::sum_all(ops::scale(a, 1.7)); }, {a});
    check("add_scalar", [=] { return ops::sum_all(ops::square(ops::add_scalar(a, 0.3))); },
          {a});
  }
  {
    Rng rng = root.fork("unary");
    auto x = rand_offzero(rng, {4, 5});
    check("relu", [=] { return ops::sum_all(ops::relu(x)); }, {x});
    check("abs", [=] { return ops::sum_all(ops::abs_t(x)); }, {x});
    auto y = rand_tensor(rng, {4, 5}, -2.0, 2.0);
    check("sigmoid", [=] { return ops::sum_all(ops::sigmoid(y)); }, {y});
    check("elu", [=] { return ops::sum_all(ops::elu(y)); }, {y});
    check("tanh", [=] { return ops::sum_all(ops::tanh_act(y)); }, {y});
    check("softplus", [=] { return ops::sum_all(ops::softplus(y)); }, {y});
    check("exp", [=] { return ops::sum_all(ops::exp_t(y)); }, {y});
    check("square", [=] { return ops::sum_all(ops::square(y)); }, {y});
  }
  {
    Rng rng = root.fork("linalg");
    auto a = rand_tensor(rng, {3, 4});
    auto b = rand_tensor(rng, {4, 2});
    auto bias = rand_tensor(rng, {2});
    check("matmul",
          [=] { return ops::sum_all(ops::square(ops::matmul(a, b))); }, {a, b});
    check("dense",
          [=] { return ops::sum_all(ops::square(ops::dense(a, b, bias))); },
          {a, b, bias});
    check("transpose2d",
          [=] { return ops::sum_all(ops::square(ops::transpose2d(a))); }, {a});
    auto row = rand_tensor(rng, {4});
    check("tile_rows",
          [=] { return ops::sum_all(ops::square(ops::tile_rows(row, 3))); },
          {row});
    check("add_rowvec",
          [=] {
            return ops::sum_all(ops::square(ops::add_rowvec(a, row)));
          },
          {a, row});
  }
  {
    Rng rng = root.fork("shape");
    auto a = rand_tensor(rng, {3, 2});
    auto b = rand_tensor(rng, {3, 4});
    check("concat_cols",
          [=] { return ops::sum_all(ops::square(ops::concat_cols(a, b))); },
          {a, b});
    auto c1 = rand_tensor(rng, {2, 3, 3});
    auto c2 = rand_tensor(rng, {1, 3, 3});
    check("concat_chan",
          [=] { return ops::sum_all(ops::square(ops::concat_chan(c1, c2))); },
          {c1, c2});
    auto src = rand_tensor(rng, {5, 3});
    const std::vector<std::size_t> idx{4, 0, 2, 2, 1};
    check("gather_rows",
          [=] { return ops::sum_all(ops::square(ops::gather_rows(src, idx))); },
          {src});
    check("reshape",
          [=] {
            return ops::sum_all(ops::square(b.reshape({2, 6})));
          },
          {b});
  }
  {
    Rng rng = root.fork("reduce");
    auto a = rand_tensor(rng, {4, 3});
    check("sum_all", [=] { return ops::square(ops::sum_all(a)); }, {a});
    check("mean_all", [=] { return ops::square(ops::mean_all(a)); }, {a});
    check("sum_rows",
          [=] { return ops::sum_all(ops::square(ops::sum_rows(a))); }, {a});
    check("sum_cols",
          [=] { return ops::sum_all(ops::square(ops::sum_cols(a))); }, {a});
    auto m = rand_tensor(rng, {3, 2, 4});
    check("sum_mid",
          [=] { return ops::sum_all(ops::square(ops::sum_mid(m))); }, {m});
    check("max_cols",
          [=] { return ops::sum_all(ops::square(ops::max_cols(a))); }, {a});
    auto den = rand_tensor(rng, {4}, 0.5, 2.0);
    check("div_rows",
          [=] { return ops::sum_all(ops::square(ops::div_rows(a, den))); },
          {a, den});
  }
  {
    Rng rng = root.fork("norm");
    auto a = rand_tensor(rng, {3, 5});
    check("softmax",
          [=] { return ops::sum_all(ops::square(ops::softmax(a))); }, {a});
    check("layer_norm",
          [=] { return ops::sum_all(ops::square(ops::layer_norm(a))); }, {a});
  }
  {
    Rng rng = root.fork("conv");
    auto x = rand_tensor(rng, {2, 5, 5});
    auto k = rand_tensor(rng, {3, 2, 3, 3});
    auto b = rand_tensor(rng, {3});
    check("conv2d_same_s1",
          [=] {
            return ops::sum_all(ops::square(
                ops::conv2d(x, k, b, 1, ops::Padding::kSame)));
          },
          {x, k, b});
    auto x6 = rand_tensor(rng, {2, 6, 6});
    check("conv2d_same_s2",
          [=] {
            return ops::sum_all(ops::square(
                ops::conv2d(x6, k, b, 2, ops::Padding::kSame)));
          },
          {x6, k, b});
    check("conv2d_valid_s1",
          [=] {
            return ops::sum_all(ops::square(
                ops::conv2d(x, k, b, 1, ops::Padding::kValid)));
          },
          {x, k, b});
    auto xr = rand_tensor(rng, {2, 4, 4});
    check("resize_up",
          [=] {
            return ops::sum_all(ops::square(ops::resize_bilinear(xr, true)));
          },
          {xr});
    check("resize_down",
          [=] {
            return ops::sum_all(ops::square(ops::resize_bilinear(xr, false)));
          },
          {xr});
  }
  {
    Rng rng = root.fork("chamfer");
    auto a = rand_tensor(rng, {5, 3});
    auto b = rand_tensor(rng, {4, 3});
    check("chamfer", [=] { return chamfer(a, b); }, {a, b});
  }
  {
    Rng rng = root.fork("attention");
    auto q = rand_tensor(rng, {4, 3});
    auto k = rand_tensor(rng, {5, 3});
    auto v = rand_tensor(rng, {5, 3});
    check("softmax_attention",
          [=] {
            return ops::sum_all(ops::square(softmax_attention(q, k, v)));
          },
          {q, k, v});
    check("linear_attention",
          [=] {
            return ops::sum_all(ops::square(linear_attention(q, k, v)));
          },
          {q, k, v});
  }
  {
    Rng rng = root.fork("gru");
    ParamStore<double> ps;
    Rng init = rng.fork("init");
    ConvGru<double> gru(ps, "gru", 3, init);
    auto h = rand_tensor(rng, {3, 4, 4});
    auto x = rand_tensor(rng, {3, 4, 4});
    std::vector<Tensor<double>> inputs{h, x};
    for (auto& [name, t] : ps.items()) inputs.push_back(t);
    check("conv_gru",
          [=] { return ops::sum_all(ops::square(gru.forward(h, x))); },
          std::move(inputs));
  }
  {
    Rng rng = root.fork("aca.composite");
    ParamStore<double> ps;
    Rng init = rng.fork("init");
    AcaModule<double> aca(ps, "aca", 4, init);
    auto feats = rand_tensor(rng, {6, 4});  // flattened (pixel, neighbor) rows
    auto enc = rand_tensor(rng, {6, 10});
    std::vector<Tensor<double>> inputs{feats, enc};
    for (auto& [name, t] : ps.items()) inputs.push_back(t);
    check("aca_attention",
          [=] {
            Tensor<double> w = aca.attention_weights(feats, enc);
            Tensor<double> agg =
                ops::sum_mid(ops::mul(w, feats).reshape({3, 2, 4}));
            return ops::sum_all(ops::square(agg));
          },
          std::move(inputs));
  }
  {
    Rng rng = root.fork("gcmf.composite");
    ParamStore<double> ps;
    Rng init = rng.fork("init");
    GcmfBlock<double> block(ps, "gcmf", 4, 3, init, true);
    auto feat = rand_tensor(rng, {4, 4, 4});
    AggregatedFeatureMap<double> agg;
    agg.values = rand_tensor(rng, {3, 4, 4});
    agg.fallback_mask.assign(16, 0);
    std::vector<Tensor<double>> inputs{feat, agg.values};
    for (auto& [name, t] : ps.items()) inputs.push_back(t);
    check("gcmf_block",
          [=] { return ops::sum_all(ops::square(block.forward(feat, agg))); },
          std::move(inputs));
  }
  {
    Rng rng = root.fork("hourglass.composite");
    ParamStore<double> ps;
    Rng init = rng.fork("init");
    Hourglass<double> hg(ps, "hg", 4, 3.0, init);
    auto feat = rand_tensor(rng, {4, 8, 8});
    auto ref = rand_tensor(rng, {1, 8, 8}, 0.5, 2.5);
    std::vector<Tensor<double>> inputs{feat};
    for (auto& [name, t] : ps.items()) inputs.push_back(t);
    check("hourglass",
          [=] {
            StageOutput<double> out = hg.forward(ref, feat, nullptr);
            return ops::add(ops::sum_all(ops::square(out.depth)),
                            ops::sum_all(ops::square(out.confidence)));
          },
          std::move(inputs));
  }
  {
    Rng rng = root.fork("pmd.composite");
    ParamStore<double> ps;
    Rng init = rng.fork("init");
    PmdStep<double> step(ps, "pmd", 3, 4, init);
    auto pos = rand_tensor(rng, {5, 3});
    std::vector<Tensor<double>> inputs{pos};
    for (auto& [name, t] : ps.items()) inputs.push_back(t);
    check("pmd_step",
          [=] {
            auto out = step.forward(pos, nullptr);
            return ops::add(ops::sum_all(ops::square(out.moved)),
                            ops::sum_all(ops::square(out.features)));
          },
          std::move(inputs));
  }
  return results;
}

inline double worst_grad_error(const std::vector<GradCaseResult>& results) {
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.max_err);
  return worst;
}

}  // namespace gadc
