// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate: ten numbered checks covering oracle equivalence, numeric
// invariants, training behavior, and persistence. Run with a criterion
// number (1-10) or "all"; each check prints one [PASS]/[FAIL] line and the
// process exits nonzero if anything failed. Tolerances are pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gadc/gadc.hpp"

namespace {

using namespace gadc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- 1: spatial
bool same_neighbors(const NeighborList& a, const NeighborList& b) {
  return a.indices == b.indices && a.distances == b.distances &&
         a.found == b.found && a.out_of_ball == b.out_of_ball;
}

Outcome criterion_spatial() {
  const auto t0 = Clock::now();
  Rng rng(901);
  std::size_t queries = 0, mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    PointSet cloud;
    const std::size_t n = 200 + rng.below(1801);
    for (std::size_t i = 0; i < n; ++i) {
      cloud.positions.push_back(
          {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      cloud.pixel_origin.push_back({0, 0});
    }
    SpatialIndex index(cloud);
    for (int q = 0; q < 250; ++q) {
      std::array<double, 3> c;
      if (rng.uniform() < 0.5) {
        const auto& base = cloud.positions[rng.below(n)];
        for (int k = 0; k < 3; ++k) c[k] = base[k] + rng.uniform(-0.1, 0.1);
      } else {
        c = {rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3),
             rng.uniform(-1.3, 1.3)};
      }
      const double r = rng.uniform(0.02, 0.6);
      const std::size_t K = 1 + rng.below(32);
      if (!same_neighbors(index.ball_query(c, r, K),
                          brute_force_ball_query(cloud, c, r, K)))
        ++mismatches;
      ++queries;
    }
    for (int q = 0; q < 250; ++q) {
      const std::array<double, 3> c{rng.uniform(-1.2, 1.2),
                                    rng.uniform(-1.2, 1.2),
                                    rng.uniform(-1.2, 1.2)};
      const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 64));
      if (!same_neighbors(index.knn_query(c, k),
                          brute_force_knn_query(cloud, c, k)))
        ++mismatches;
      ++queries;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = queries >= 10000 && mismatches == 0 && secs < 60.0;
  o.detail = std::to_string(queries) + " queries, " +
             std::to_string(mismatches) + " mismatches, " + fmt(secs) + "s";
  return o;
}

// --------------------------------------------------------------- 2: geometry
Mat4 rot_z(double a) {
  Mat4 m = Mat4::identity();
  m(0, 0) = std::cos(a);
  m(0, 1) = -std::sin(a);
  m(1, 0) = std::sin(a);
  m(1, 1) = std::cos(a);
  return m;
}

Mat4 rot_x(double a) {
  Mat4 m = Mat4::identity();
  m(1, 1) = std::cos(a);
  m(1, 2) = -std::sin(a);
  m(2, 1) = std::sin(a);
  m(2, 2) = std::cos(a);
  return m;
}

Outcome criterion_geometry() {
  Rng rng(902);
  double max_px = 0, max_d = 0;
  for (int pair = 0; pair < 100; ++pair) {
    CameraModel cam;
    cam.fx = rng.uniform(200, 800);
    cam.fy = rng.uniform(200, 800);
    cam.cx = rng.uniform(4, 12);
    cam.cy = rng.uniform(3, 9);
    cam.width = 16;
    cam.height = 12;
    cam.extrinsics = rot_z(rng.uniform(-3, 3)) * rot_x(rng.uniform(-3, 3));
    cam.extrinsics(0, 3) = rng.uniform(-0.5, 0.5);
    cam.extrinsics(1, 3) = rng.uniform(-0.5, 0.5);
    cam.extrinsics(2, 3) = rng.uniform(-0.5, 0.5);
    cam.validate();

    DepthMap depth(cam.height, cam.width);
    for (auto& v : depth.values())
      v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.3, 5.0);

    const PointSet pts = back_project(depth, cam);
    const Projection proj = project(pts, cam);
    for (const auto& e : proj.entries) {
      const auto& origin = pts.pixel_origin[e.point_index];
      const double du = std::abs(e.u - static_cast<double>(origin[0]));
      const double dv = std::abs(e.v - static_cast<double>(origin[1]));
      const double dd = std::abs(
          e.d - depth.at(static_cast<std::size_t>(origin[1]),
                         static_cast<std::size_t>(origin[0])));
      max_px = std::max({max_px, du, dv});
      max_d = std::max(max_d, dd);
    }
  }
  Outcome o;
  o.pass = max_px < 1e-5 && max_d < 1e-9;
  o.detail = "max pixel err " + fmt(max_px) + ", max depth err " + fmt(max_d);
  return o;
}

// ----------------------------------------------------------------- 3: radius
Outcome criterion_radius() {
  const double r_min = 0.05, r_max = 0.1;
  bool ok = adaptive_radius(0.0, r_min, r_max) == 0.10 &&
            adaptive_radius(1.0, r_min, r_max) == 0.05 &&
            std::abs(adaptive_radius(0.5, r_min, r_max) - 0.075) <= 1e-15;
  Rng rng(903);
  std::size_t clamped_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const double c = rng.uniform(-2.0, 3.0);
    const double r = adaptive_radius(c, r_min, r_max);
    if (r >= r_min && r <= r_max) ++clamped_ok;
    // interpolation is linear once clamped
    const double cc = std::clamp(c, 0.0, 1.0);
    if (std::abs(r - (cc * r_min + (1.0 - cc) * r_max)) > 1e-15) ok = false;
  }
  Outcome o;
  o.pass = ok && clamped_ok == 1000;
  o.detail = "endpoints exact, midpoint within 1e-15, " +
             std::to_string(clamped_ok) + "/1000 clamped into range";
  return o;
}

// -------------------------------------------------------------- 4: gradients
Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_name;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& r : run_grad_suite(seed)) {
      if (r.max_err > worst) {
        worst = r.max_err;
        worst_name = r.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < 1e-4 && secs < 600.0;
  o.detail = "worst rel err " + fmt(worst) + " (" + worst_name + "), 10 seeds, " +
             fmt(secs) + "s";
  return o;
}

// -------------------------------------------------------------- 5: attention
Outcome criterion_attention() {
  Rng rng(905);
  std::size_t hull_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(32), m = 2 + rng.below(31);
    const std::size_t d = 1 + rng.below(8), dv = 1 + rng.below(8);
    std::vector<float> qv(n * d), kv(m * d), vv(m * dv);
    for (auto& x : qv) x = static_cast<float>(rng.uniform(-3, 3));
    for (auto& x : kv) x = static_cast<float>(rng.uniform(-3, 3));
    for (auto& x : vv) x = static_cast<float>(rng.uniform(-3, 3));
    auto out = linear_attention(Tensor<float>::from_data({n, d}, qv),
                                Tensor<float>::from_data({m, d}, kv),
                                Tensor<float>::from_data({m, dv}, vv));
    for (std::size_t c = 0; c < dv; ++c) {
      float lo = vv[c], hi = vv[c];
      for (std::size_t j = 1; j < m; ++j) {
        lo = std::min(lo, vv[j * dv + c]);
        hi = std::max(hi, vv[j * dv + c]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const float x = out.vals()[i * dv + c];
        if (x < lo - 1e-6f || x > hi + 1e-6f) ++hull_violations;
      }
    }
  }

  std::size_t m1_mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(16), d = 1 + rng.below(8),
                      dv = 1 + rng.below(8);
    std::vector<float> qv(n * d), kv(d), vv(dv);
    for (auto& x : qv) x = static_cast<float>(rng.uniform(-3, 3));
    for (auto& x : kv) x = static_cast<float>(rng.uniform(-3, 3));
    for (auto& x : vv) x = static_cast<float>(rng.uniform(-3, 3));
    auto q = Tensor<float>::from_data({n, d}, qv);
    auto k = Tensor<float>::from_data({1, d}, kv);
    auto v = Tensor<float>::from_data({1, dv}, vv);
    auto lin = linear_attention(q, k, v);
    auto soft = softmax_attention(q, k, v);
    for (std::size_t i = 0; i < lin.numel(); ++i)
      if (lin.vals()[i] != soft.vals()[i]) ++m1_mismatches;
  }

  // doubling the token count must not much more than double the cost
  NoGradGuard guard;
  auto bench = [&](std::size_t n) {
    std::vector<float> qv(n * 32), kv(n * 32), vv(n * 32);
    Rng brng(906);
    for (auto& x : qv) x = static_cast<float>(brng.uniform(-1, 1));
    for (auto& x : kv) x = static_cast<float>(brng.uniform(-1, 1));
    for (auto& x : vv) x = static_cast<float>(brng.uniform(-1, 1));
    auto q = Tensor<float>::from_data({n, 32}, qv);
    auto k = Tensor<float>::from_data({n, 32}, kv);
    auto v = Tensor<float>::from_data({n, 32}, vv);
    double best = 1e30;
    for (int run = 0; run < 5; ++run) {
      const auto t0 = Clock::now();
      auto out = linear_attention(q, k, v);
      best = std::min(best, seconds_since(t0));
      if (!std::isfinite(static_cast<double>(out.vals()[0]))) best = 1e30;
    }
    return best;
  };
  const double t_n = bench(4096), t_2n = bench(8192);
  const double ratio = t_2n / t_n;

  Outcome o;
  o.pass = hull_violations == 0 && m1_mismatches == 0 && ratio <= 2.6;
  o.detail = std::to_string(hull_violations) + " hull violations/1000, " +
             std::to_string(m1_mismatches) +
             " single-key mismatches/100, 2x-tokens time ratio " + fmt(ratio);
  return o;
}

// ------------------------------------------------------------------- 6: gru
Outcome criterion_gru() {
  Rng rng(907);
  std::size_t zero_fail = 0, one_fail = 0, hull_fail = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.below(6);
    const std::size_t h = 1 + rng.below(9), w = 1 + rng.below(9);
    ParamStore<float> ps;
    Rng init = rng.fork("init." + std::to_string(trial));
    ConvGru<float> gru(ps, "g", d, init);
    std::vector<float> hv(d * h * w), xv(d * h * w);
    for (auto& x : hv) x = static_cast<float>(rng.uniform(-2, 2));
    for (auto& x : xv) x = static_cast<float>(rng.uniform(-2, 2));
    auto state = Tensor<float>::from_data({d, h, w}, hv);
    auto input = Tensor<float>::from_data({d, h, w}, xv);

    auto frozen = gru.forward(state, input, GruGate::kForceZero);
    if (std::memcmp(frozen.vals().data(), state.vals().data(),
                    hv.size() * sizeof(float)) != 0)
      ++zero_fail;

    // recompute the candidate from the registered kernels
    auto conv = [&](const std::string& name, const Tensor<float>& in) {
      return ops::conv2d(in, ps.at("g." + name + ".k"),
                         ps.at("g." + name + ".b"), 1, ops::Padding::kSame);
    };
    auto hx = ops::concat_chan(state, input);
    auto r = ops::sigmoid(conv("r", hx));
    auto cand = ops::tanh_act(conv("h", ops::concat_chan(ops::mul(r, state),
                                                         input)));
    auto forced = gru.forward(state, input, GruGate::kForceOne);
    if (std::memcmp(forced.vals().data(), cand.vals().data(),
                    hv.size() * sizeof(float)) != 0)
      ++one_fail;

    // the learned update interpolates between the two forced limits
    auto learned = gru.forward(state, input, GruGate::kLearned);
    for (std::size_t i = 0; i < hv.size(); ++i) {
      const float lo = std::min(frozen.vals()[i], forced.vals()[i]);
      const float hi = std::max(frozen.vals()[i], forced.vals()[i]);
      if (learned.vals()[i] < lo - 1e-6f || learned.vals()[i] > hi + 1e-6f)
        ++hull_fail;
    }
  }
  Outcome o;
  o.pass = zero_fail == 0 && one_fail == 0 && hull_fail == 0;
  o.detail = "30 shapes: " + std::to_string(zero_fail) +
             " frozen-state mismatches, " + std::to_string(one_fail) +
             " candidate mismatches, " + std::to_string(hull_fail) +
             " interpolation violations";
  return o;
}

// --------------------------------------------------------------- 7: metrics
Outcome criterion_metrics() {
  Rng rng(908);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 2 + rng.below(10), w = 2 + rng.below(10);
    DepthMap gt(h, w), pred(h, w);
    std::vector<std::uint8_t> mask(h * w, 0);
    for (std::size_t i = 0; i < h * w; ++i) {
      gt.values()[i] = rng.uniform(0.3, 3.0);
      pred.values()[i] = gt.values()[i] + rng.uniform(-0.5, 0.5);
      if (rng.uniform() < 0.03) pred.values()[i] = -0.2;
      mask[i] = rng.uniform() < 0.5 ? 255 : 0;
    }
    mask[rng.below(h * w)] = 255;
    const Metrics m = compute_metrics(pred, gt, mask);

    long double se = 0, ae = 0, rel = 0;
    std::size_t n = 0, a = 0, b = 0, c = 0;
    for (std::size_t i = 0; i < h * w; ++i) {
      if (!mask[i]) continue;
      const double p = pred.values()[i], g = gt.values()[i];
      se += (p - g) * (p - g);
      ae += std::fabs(p - g);
      rel += std::fabs(p - g) / g;
      if (p > 0) {
        const double ratio = p > g ? p / g : g / p;
        a += ratio < 1.05;
        b += ratio < 1.10;
        c += ratio < 1.25;
      }
      ++n;
    }
    const double dn = static_cast<double>(n);
    worst = std::max({worst, std::abs(m.rmse - std::sqrt(double(se) / dn)),
                      std::abs(m.mae - double(ae) / dn),
                      std::abs(m.rel - double(rel) / dn),
                      std::abs(m.d105 - 100.0 * a / dn),
                      std::abs(m.d110 - 100.0 * b / dn),
                      std::abs(m.d125 - 100.0 * c / dn)});
  }

  DepthMap pred(1, 1), gt(1, 1);
  pred.values()[0] = 1.1;
  gt.values()[0] = 1.0;
  const Metrics edge = compute_metrics(pred, gt, {255});
  const bool boundary_ok =
      edge.d105 == 0.0 && edge.d110 == 0.0 && edge.d125 == 100.0;

  Outcome o;
  o.pass = worst < 1e-9 && boundary_ok;
  o.detail = "worst oracle gap " + fmt(worst) + "/1000 cases, boundary (0,0,100) " +
             (boundary_ok ? "exact" : "WRONG");
  return o;
}

// --------------------------------------------------------------- 8: overfit
Outcome criterion_overfit() {
  const auto t0 = Clock::now();
  TrainConfig cfg = desk_profile();
  cfg.epochs = 3600;  // one sample, so one iteration per epoch
  cfg.milestones = {1543, 2829, 3343};
  cfg.checkpoint_every = 0;
  const SceneSample scene = generate_scene(1, cfg.scene);
  const PreparedSample sample = prepare_sample(scene, cfg.model);
  Trainer trainer(cfg);
  const TrainStats stats = trainer.fit({sample}, nullptr);

  const double first = stats.iterations.front().total;
  double min200 = first;
  for (std::size_t i = 0; i < std::min<std::size_t>(200, stats.iterations.size());
       ++i)
    min200 = std::min(min200, stats.iterations[i].total);
  const double drop = first / min200;
  const Metrics m = compute_metrics(trainer.infer(sample), sample.gt,
                                    sample.mask);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = drop >= 10.0 && m.rmse < 0.01 && secs <= 900.0;
  o.detail = "loss drop x" + fmt(drop) + " within 200 iters, final masked rmse " +
             fmt(m.rmse) + "m, " + fmt(secs) + "s";
  return o;
}

// -------------------------------------------------------------- 9: ablation
Outcome criterion_ablation() {
  const auto t0 = Clock::now();
  TrainConfig base = desk_profile();
  std::vector<SceneSample> samples;
  samples.reserve(100);
  for (std::size_t i = 0; i < 100; ++i)
    samples.push_back(
        generate_scene(base.seed * 1000003ull + i, base.scene));
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto cells = run_ablation(base, samples, seeds, false, &std::cerr);

  std::map<std::pair<std::string, std::uint64_t>, double> rmse;
  for (const auto& c : cells) rmse[{c.config, c.seed}] = c.metrics.rmse;
  std::cerr << ablation_csv(cells);

  int ordered = 0;
  std::string per_seed;
  for (const auto seed : seeds) {
    auto r = [&](const char* name) { return rmse.at({name, seed}); };
    const bool fusion_ok =
        r("baseline") >= r("add3d") && r("add3d") >= r("full");
    const bool query_ok = r("query_none") >= r("query_knn") &&
                          r("query_none") >= r("query_ball") &&
                          r("query_knn") >= r("full") &&
                          r("query_ball") >= r("full");
    if (fusion_ok && query_ok) ++ordered;
    per_seed += " seed" + std::to_string(seed) +
                (fusion_ok && query_ok ? "=ok" : "=out-of-order");
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ordered >= 2 && secs <= 7200.0;
  o.detail = std::to_string(ordered) + "/3 seeds fully ordered:" + per_seed +
             ", " + fmt(secs) + "s";
  return o;
}

// ---------------------------------------------------------- 10: determinism
Outcome criterion_determinism() {
  namespace fs = std::filesystem;
  TrainConfig cfg = desk_profile();
  cfg.epochs = 2;
  cfg.max_samples = 3;
  std::vector<PreparedSample> samples;
  for (std::uint64_t i = 0; i < 3; ++i)
    samples.push_back(prepare_sample(
        generate_scene(cfg.seed * 1000003ull + i, cfg.scene), cfg.model));

  std::ostringstream log_a, log_b;
  Trainer(cfg).fit(samples, &log_a);
  Trainer(cfg).fit(samples, &log_b);
  const bool logs_ok = log_a.str() == log_b.str() && log_a.str().size() > 40;

  const fs::path dir = fs::temp_directory_path() / "gadc_acceptance_ckpt";
  fs::remove_all(dir);
  Trainer trained(cfg);
  trained.fit(samples, nullptr, dir);
  const fs::path saved = dir / "epoch_1.ckpt";
  Trainer fresh(cfg);
  load_checkpoint(saved, fresh.model().params(), &fresh.optimizer());
  save_checkpoint(dir / "resaved.ckpt", fresh.model().params(),
                  &fresh.optimizer(), 1, config_hash(cfg));
  std::ifstream fa(saved, std::ios::binary), fb(dir / "resaved.ckpt",
                                               std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {});
  std::string sb((std::istreambuf_iterator<char>(fb)), {});
  const bool ckpt_ok = !sa.empty() && sa == sb;

  // sample files: depth quantizes to millimeters, nothing else may drift
  const SceneSample scene = generate_scene(77, cfg.scene);
  save_sample((dir / "sample_000000").string(), scene);
  const SceneSample back = load_sample((dir / "sample_000000").string());
  double max_depth_err = 0;
  for (std::size_t i = 0; i < scene.gt_depth.values().size(); ++i) {
    max_depth_err = std::max(
        max_depth_err,
        std::abs(back.gt_depth.values()[i] - scene.gt_depth.values()[i]));
    max_depth_err = std::max(
        max_depth_err,
        std::abs(back.raw_depth.values()[i] - scene.raw_depth.values()[i]));
  }
  const bool files_ok = max_depth_err <= 1e-3 && back.mask == scene.mask;
  fs::remove_all(dir);

  Outcome o;
  o.pass = logs_ok && ckpt_ok && files_ok;
  o.detail = std::string("loss logs ") + (logs_ok ? "bit-identical" : "DIFFER") +
             ", checkpoint round trip " + (ckpt_ok ? "bit-exact" : "DIFFERS") +
             ", depth file err " + fmt(max_depth_err) + "m";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "spatial queries match the exhaustive oracle", criterion_spatial},
    {2, "projection round trip is tight", criterion_geometry},
    {3, "confidence-adaptive radius law", criterion_radius},
    {4, "finite-difference gradient suite", criterion_gradients},
    {5, "linear attention invariants and scaling", criterion_attention},
    {6, "convolutional GRU gate limits", criterion_gru},
    {7, "depth metrics match the scalar oracle", criterion_metrics},
    {8, "single-scene overfit", criterion_overfit},
    {9, "ablation ordering across seeds", criterion_ablation},
    {10, "determinism and persistence", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::string which = argc > 1 ? argv[1] : "all";
  int failures = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (which != "all" && which != std::to_string(c.id)) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id
              << ": " << c.name << " (" << o.detail << ")\n";
    std::cout.flush();
    if (!o.pass) ++failures;
  }
  if (ran == 0) {
    std::cerr << "usage: acceptance [1-10|all]\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
