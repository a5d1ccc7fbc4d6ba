// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded training and evaluation loops. Sample order, initialization, and
// arithmetic are all deterministic, so two runs with the same seed produce
// bit-identical loss logs.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "gadc/checkpoint.hpp"
#include "gadc/config.hpp"
#include "gadc/io.hpp"
#include "gadc/loss.hpp"
#include "gadc/maps.hpp"
#include "gadc/metrics.hpp"
#include "gadc/model.hpp"
#include "gadc/optim.hpp"

namespace gadc {

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Everything the loop needs per sample, precomputed once: the RGB tensor,
// per-scale ground truth, and the target cloud for the point objective.
struct PreparedSample {
  std::string id;
  Tensor<float> rgb;
  DepthMap raw{1, 1};
  DepthMap gt{1, 1};
  std::array<DepthMap, 3> gt_scales{DepthMap(1, 1), DepthMap(1, 1),
                                    DepthMap(1, 1)};
  std::vector<std::uint8_t> mask;
  CameraModel camera;
  Tensor<float> gt_cloud;  // [n_fixed, 3], constant
};

inline PreparedSample prepare_sample(const SceneSample& s,
                                     const ModelConfig& mc) {
  PreparedSample p;
  p.id = s.id;
  const std::size_t h = s.gt_depth.height(), w = s.gt_depth.width();
  std::vector<float> rgb(s.rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i)
    rgb[i] = static_cast<float>(s.rgb[i]);
  p.rgb = Tensor<float>::from_data({3, h, w}, std::move(rgb));
  p.raw = s.raw_depth;
  p.gt = s.gt_depth;
  p.gt_scales = {masked_block_mean_downsample(s.gt_depth, 4),
                 masked_block_mean_downsample(s.gt_depth, 2), s.gt_depth};
  p.mask = s.mask;
  p.camera = s.camera;
  if (mc.point_branch_active()) {
    PointSet gt_cloud = back_project(s.gt_depth, s.camera);
    if (gt_cloud.size() == 0)
      throw input_error("sample " + s.id + ": empty ground-truth cloud");
    const PointSet fixed = sample_fixed(gt_cloud, mc.n_fixed);
    p.gt_cloud = Model<float>::positions_to_tensor(fixed);
  }
  return p;
}

inline std::vector<PreparedSample> load_prepared(
    const std::filesystem::path& data_dir, const ModelConfig& mc,
    std::size_t max_samples) {
  const auto dirs = list_sample_dirs(data_dir);
  std::vector<PreparedSample> out;
  for (const auto& d : dirs) {
    if (max_samples && out.size() >= max_samples) break;
    out.push_back(prepare_sample(load_sample(d), mc));
  }
  return out;
}

struct IterationRecord {
  std::size_t epoch = 0, iter = 0;
  std::string sample;
  double total = 0, image = 0, point = 0;
};

struct TrainStats {
  std::vector<IterationRecord> iterations;
  std::vector<double> epoch_mean;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg)
      : cfg_(cfg), model_(cfg.model, cfg.seed) {
    cfg_.validate();
  }

  Model<float>& model() { return model_; }
  Adam<float>& optimizer() { return opt_; }
  const TrainConfig& config() const { return cfg_; }

  // One optimizer step on one sample; returns the realized losses.
  IterationRecord step(const PreparedSample& s, double lr) {
    model_.params().zero_grads();
    Prediction<float> pred = model_.predict(s.rgb, s.raw, s.camera);
    LossParts<float> loss = joint_loss(pred.stages, s.gt_scales,
                                       pred.point_steps, s.gt_cloud, cfg_.loss);
    IterationRecord rec;
    rec.sample = s.id;
    rec.total = loss.total.item();
    rec.image = loss.image.item();
    rec.point = loss.point.defined() ? loss.point.item() : 0.0;
    if (!std::isfinite(rec.total))
      throw numeric_error("non-finite loss on sample " + s.id);
    loss.total.backward();
    opt_.step(model_.params(), static_cast<float>(lr));
    return rec;
  }

  // `loss_log` (when given) receives one CSV line per iteration with %.17g
  // fields — the determinism witness. Checkpoints land in `out_dir` unless
  // it is empty.
  TrainStats fit(const std::vector<PreparedSample>& samples,
                 std::ostream* loss_log,
                 const std::filesystem::path& out_dir = {},
                 std::ostream* progress = nullptr) {
    if (samples.empty()) throw input_error("training: no samples");
    if (loss_log) *loss_log << "epoch,iter,sample,total,image,point\n";
    TrainStats stats;
    Rng order_rng = Rng(cfg_.seed).fork("sample.order");
    const std::uint64_t hash = config_hash(cfg_);
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const double lr =
          lr_schedule(epoch, cfg_.base_lr, cfg_.lr_decay, cfg_.milestones);
      std::vector<std::size_t> order(samples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      order_rng.shuffle(order.begin(), order.end());
      double sum = 0.0;
      for (std::size_t it = 0; it < order.size(); ++it) {
        IterationRecord rec = step(samples[order[it]], lr);
        rec.epoch = epoch;
        rec.iter = it;
        sum += rec.total;
        if (loss_log)
          *loss_log << rec.epoch << ',' << rec.iter << ',' << rec.sample << ','
                    << g17(rec.total) << ',' << g17(rec.image) << ','
                    << g17(rec.point) << '\n';
        stats.iterations.push_back(std::move(rec));
      }
      stats.epoch_mean.push_back(sum / static_cast<double>(samples.size()));
      if (progress)
        *progress << "epoch " << epoch << " lr " << lr << " mean loss "
                  << stats.epoch_mean.back() << "\n";
      if (!out_dir.empty() && cfg_.checkpoint_every &&
          ((epoch + 1) % cfg_.checkpoint_every == 0 ||
           epoch + 1 == cfg_.epochs)) {
        std::filesystem::create_directories(out_dir);
        save_checkpoint(out_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"),
                        model_.params(), &opt_,
                        static_cast<std::uint32_t>(epoch), hash);
      }
    }
    return stats;
  }

  // Full-resolution prediction for one sample, gradient-free.
  DepthMap infer(const PreparedSample& s) {
    NoGradGuard guard;
    Prediction<float> pred = model_.predict(s.rgb, s.raw, s.camera);
    return Model<float>::tensor_to_depth(pred.stages[2].depth);
  }

  // Mean metrics over the transparent-mask pixels of every sample.
  Metrics evaluate(const std::vector<PreparedSample>& samples) {
    if (samples.empty()) throw input_error("evaluation: no samples");
    Metrics mean;
    for (const auto& s : samples) {
      const DepthMap pred = infer(s);
      mean += compute_metrics(pred, s.gt, s.mask);
    }
    mean /= static_cast<double>(samples.size());
    return mean;
  }

 private:
  TrainConfig cfg_;
  Model<float> model_;
  Adam<float> opt_;
};

}  // namespace gadc
