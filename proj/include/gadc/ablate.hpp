// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Ablation driver: trains the fusion and neighborhood-query variants under
// identical budgets and reports masked depth metrics per (config, seed).

#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "gadc/config.hpp"
#include "gadc/metrics.hpp"
#include "gadc/train.hpp"

namespace gadc {

struct AblationRow {
  std::string name;
  QueryStrategy strategy = QueryStrategy::kAdaptive;
  std::array<FuseMode, 3> fuse{FuseMode::kGcmf, FuseMode::kGcmf,
                               FuseMode::kGcmf};
};

// The two comparison chains share the full model: fusion depth
// (baseline / additive / full gating) and query strategy (none / knn /
// fixed ball / adaptive ball).
inline std::vector<AblationRow> ablation_rows(bool include_partial_gcmf) {
  std::vector<AblationRow> rows;
  rows.push_back({"baseline", QueryStrategy::kNone,
                  {FuseMode::kOff, FuseMode::kOff, FuseMode::kOff}});
  rows.push_back({"add3d", QueryStrategy::kAdaptive,
                  {FuseMode::kAdd, FuseMode::kAdd, FuseMode::kAdd}});
  if (include_partial_gcmf) {
    rows.push_back({"gcmf_quarter", QueryStrategy::kAdaptive,
                    {FuseMode::kGcmf, FuseMode::kAdd, FuseMode::kAdd}});
    rows.push_back({"gcmf_half", QueryStrategy::kAdaptive,
                    {FuseMode::kGcmf, FuseMode::kGcmf, FuseMode::kAdd}});
  }
  rows.push_back({"full", QueryStrategy::kAdaptive,
                  {FuseMode::kGcmf, FuseMode::kGcmf, FuseMode::kGcmf}});
  rows.push_back({"query_none", QueryStrategy::kNone,
                  {FuseMode::kGcmf, FuseMode::kGcmf, FuseMode::kGcmf}});
  rows.push_back({"query_knn", QueryStrategy::kKnn,
                  {FuseMode::kGcmf, FuseMode::kGcmf, FuseMode::kGcmf}});
  rows.push_back({"query_ball", QueryStrategy::kFixedBall,
                  {FuseMode::kGcmf, FuseMode::kGcmf, FuseMode::kGcmf}});
  return rows;
}

struct AblationCell {
  std::string config;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  Metrics metrics;
};

// Trains every (row, seed) pair on the same sample set and evaluates on it;
// with a handful of epochs this probes capacity, not generalization.
inline std::vector<AblationCell> run_ablation(
    const TrainConfig& base, const std::vector<SceneSample>& samples,
    const std::vector<std::uint64_t>& seeds, bool include_partial_gcmf,
    std::ostream* progress) {
  std::vector<AblationCell> cells;
  for (const auto& row : ablation_rows(include_partial_gcmf)) {
    TrainConfig cfg = base;
    cfg.model.aca.strategy = row.strategy;
    cfg.model.fuse = row.fuse;
    std::vector<PreparedSample> prepared;
    prepared.reserve(samples.size());
    for (const auto& s : samples) prepared.push_back(prepare_sample(s, cfg.model));
    for (const auto seed : seeds) {
      cfg.seed = seed;
      Trainer trainer(cfg);
      TrainStats stats = trainer.fit(prepared, nullptr);
      AblationCell cell;
      cell.config = row.name;
      cell.seed = seed;
      cell.final_loss = stats.epoch_mean.back();
      cell.metrics = trainer.evaluate(prepared);
      if (progress)
        *progress << row.name << " seed " << seed << " rmse "
                  << cell.metrics.rmse << " loss " << cell.final_loss << "\n";
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

inline std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::string out = std::string("config,seed,final_loss,") +
                    Metrics::csv_header() + "\n";
  for (const auto& c : cells)
    out += c.config + "," + std::to_string(c.seed) + "," + g17(c.final_loss) +
           "," + c.metrics.csv() + "\n";
  return out;
}

}  // namespace gadc
