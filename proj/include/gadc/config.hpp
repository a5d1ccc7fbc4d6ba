// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: the desk and paper profiles, JSON file overrides, and a
// stable hash of every semantic field for checkpoint compatibility checks.

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gadc/common.hpp"
#include "gadc/dataset.hpp"
#include "gadc/loss.hpp"
#include "gadc/model.hpp"

namespace gadc {

inline const char* fuse_name(FuseMode m) {
  switch (m) {
    case FuseMode::kOff: return "off";
    case FuseMode::kAdd: return "add";
    case FuseMode::kGcmf: return "gcmf";
  }
  throw config_error("unknown fuse mode");
}

inline FuseMode parse_fuse(const std::string& s) {
  if (s == "off") return FuseMode::kOff;
  if (s == "add") return FuseMode::kAdd;
  if (s == "gcmf") return FuseMode::kGcmf;
  throw config_error("unknown fuse mode: " + s + " (expected off|add|gcmf)");
}

// Comma-separated list of scales that get the full gated block ("1/4", "1/2",
// "1/1"); the remaining scales use the additive projection. "none" keeps the
// additive path everywhere, "off" disables fusion entirely.
inline std::array<FuseMode, 3> parse_gcmf_scales(const std::string& flag) {
  std::array<FuseMode, 3> fuse{FuseMode::kAdd, FuseMode::kAdd, FuseMode::kAdd};
  if (flag == "off") return {FuseMode::kOff, FuseMode::kOff, FuseMode::kOff};
  if (flag.empty() || flag == "none") return fuse;
  std::size_t start = 0;
  while (start <= flag.size()) {
    const auto comma = flag.find(',', start);
    const std::string tok =
        flag.substr(start, comma == std::string::npos ? comma : comma - start);
    if (tok == "1/4") fuse[0] = FuseMode::kGcmf;
    else if (tok == "1/2") fuse[1] = FuseMode::kGcmf;
    else if (tok == "1/1") fuse[2] = FuseMode::kGcmf;
    else throw config_error("unknown scale in gcmf list: '" + tok +
                            "' (expected 1/4, 1/2, 1/1)");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fuse;
}

struct TrainConfig {
  std::string profile = "desk";
  ModelConfig model;
  LossConfig loss;
  SceneSpec scene;
  std::size_t epochs = 10;
  double base_lr = 1e-3;
  double lr_decay = 5.0;
  std::vector<std::size_t> milestones{5, 15, 25, 35};
  std::uint64_t seed = 1;
  std::size_t max_samples = 0;  // 0 = use every sample in the data directory
  std::size_t checkpoint_every = 1;

  void validate() const {
    model.validate();
    loss.validate();
    if (epochs == 0) throw config_error("config: epochs must be positive");
    if (!(base_lr > 0)) throw config_error("config: base_lr must be positive");
    if (!(lr_decay > 0)) throw config_error("config: lr_decay must be positive");
    if (scene.width % 16 != 0 || scene.height % 16 != 0)
      throw config_error("config: scene width and height must be divisible by 16");
  }
};

inline TrainConfig desk_profile() {
  TrainConfig c;
  c.profile = "desk";
  c.model.w_quarter = 16;
  c.model.w_half = 12;
  c.model.w_full = 16;
  c.model.f_p = 8;
  c.model.n_fixed = 256;
  c.model.aca.K = 8;
  c.scene.width = 64;
  c.scene.height = 48;
  c.epochs = 10;
  return c;
}

inline TrainConfig paper_profile() {
  TrainConfig c;
  c.profile = "paper";
  c.scene.width = 320;
  c.scene.height = 240;
  c.epochs = 40;
  return c;
}

inline TrainConfig named_profile(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw config_error("unknown profile: " + name + " (expected desk|paper)");
}

namespace detail {

// Known-key guard: a misspelled key in a config file is an error, not a
// silently ignored default.
inline void check_keys(const nlohmann::json& j,
                       const std::vector<std::string>& known,
                       const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw config_error("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["profile"] = c.profile;
  j["model"] = {
      {"w_quarter", c.model.w_quarter},
      {"w_half", c.model.w_half},
      {"w_full", c.model.w_full},
      {"f_p", c.model.f_p},
      {"n_fixed", c.model.n_fixed},
      {"max_depth", c.model.max_depth},
      {"layer_norm", c.model.layer_norm},
      {"aca",
       {{"strategy", strategy_name(c.model.aca.strategy)},
        {"K", c.model.aca.K},
        {"r_min", c.model.aca.r_min},
        {"r_max", c.model.aca.r_max}}},
      {"fuse",
       {fuse_name(c.model.fuse[0]), fuse_name(c.model.fuse[1]),
        fuse_name(c.model.fuse[2])}},
  };
  j["loss"] = {{"lambda", c.loss.lambda},
               {"tau", c.loss.tau},
               {"beta", c.loss.beta},
               {"stage_weights", c.loss.stage_weights}};
  j["scene"] = {{"width", c.scene.width},
                {"height", c.scene.height},
                {"min_objects", c.scene.min_objects},
                {"max_objects", c.scene.max_objects},
                {"transparent_prob", c.scene.transparent_prob},
                {"hole_prob", c.scene.hole_prob},
                {"noise_sigma", c.scene.noise_sigma}};
  j["train"] = {{"epochs", c.epochs},
                {"base_lr", c.base_lr},
                {"lr_decay", c.lr_decay},
                {"milestones", c.milestones},
                {"seed", c.seed},
                {"max_samples", c.max_samples},
                {"checkpoint_every", c.checkpoint_every}};
  return j;
}

// Applies a (possibly partial) JSON document on top of `c`.
inline void apply_json_overrides(TrainConfig& c, const nlohmann::json& j) {
  detail::check_keys(j, {"profile", "model", "loss", "scene", "train"}, "root");
  try {
    if (j.contains("profile")) c.profile = j.at("profile").get<std::string>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      detail::check_keys(m,
                         {"w_quarter", "w_half", "w_full", "f_p", "n_fixed",
                          "max_depth", "layer_norm", "aca", "fuse"},
                         "model");
      c.model.w_quarter = m.value("w_quarter", c.model.w_quarter);
      c.model.w_half = m.value("w_half", c.model.w_half);
      c.model.w_full = m.value("w_full", c.model.w_full);
      c.model.f_p = m.value("f_p", c.model.f_p);
      c.model.n_fixed = m.value("n_fixed", c.model.n_fixed);
      c.model.max_depth = m.value("max_depth", c.model.max_depth);
      c.model.layer_norm = m.value("layer_norm", c.model.layer_norm);
      if (m.contains("aca")) {
        const auto& a = m.at("aca");
        detail::check_keys(a, {"strategy", "K", "r_min", "r_max"}, "model.aca");
        if (a.contains("strategy"))
          c.model.aca.strategy = parse_strategy(a.at("strategy").get<std::string>());
        c.model.aca.K = a.value("K", c.model.aca.K);
        c.model.aca.r_min = a.value("r_min", c.model.aca.r_min);
        c.model.aca.r_max = a.value("r_max", c.model.aca.r_max);
      }
      if (m.contains("fuse")) {
        const auto& f = m.at("fuse");
        if (!f.is_array() || f.size() != 3)
          throw config_error("config: model.fuse must be a 3-element array");
        for (std::size_t s = 0; s < 3; ++s)
          c.model.fuse[s] = parse_fuse(f[s].get<std::string>());
      }
    }
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      detail::check_keys(l, {"lambda", "tau", "beta", "stage_weights"}, "loss");
      c.loss.lambda = l.value("lambda", c.loss.lambda);
      c.loss.tau = l.value("tau", c.loss.tau);
      c.loss.beta = l.value("beta", c.loss.beta);
      if (l.contains("stage_weights")) {
        const auto w = l.at("stage_weights").get<std::vector<double>>();
        if (w.size() != 3)
          throw config_error("config: loss.stage_weights must have 3 entries");
        for (std::size_t s = 0; s < 3; ++s) c.loss.stage_weights[s] = w[s];
      }
    }
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      detail::check_keys(s,
                         {"width", "height", "min_objects", "max_objects",
                          "transparent_prob", "hole_prob", "noise_sigma"},
                         "scene");
      c.scene.width = s.value("width", c.scene.width);
      c.scene.height = s.value("height", c.scene.height);
      c.scene.min_objects = s.value("min_objects", c.scene.min_objects);
      c.scene.max_objects = s.value("max_objects", c.scene.max_objects);
      c.scene.transparent_prob =
          s.value("transparent_prob", c.scene.transparent_prob);
      c.scene.hole_prob = s.value("hole_prob", c.scene.hole_prob);
      c.scene.noise_sigma = s.value("noise_sigma", c.scene.noise_sigma);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::check_keys(t,
                         {"epochs", "base_lr", "lr_decay", "milestones", "seed",
                          "max_samples", "checkpoint_every"},
                         "train");
      c.epochs = t.value("epochs", c.epochs);
      c.base_lr = t.value("base_lr", c.base_lr);
      c.lr_decay = t.value("lr_decay", c.lr_decay);
      if (t.contains("milestones"))
        c.milestones = t.at("milestones").get<std::vector<std::size_t>>();
      c.seed = t.value("seed", c.seed);
      c.max_samples = t.value("max_samples", c.max_samples);
      c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

inline TrainConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw input_error("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config parse error at byte " + std::to_string(e.byte) +
                       " in " + path.string());
  }
  TrainConfig c =
      j.contains("profile")
          ? named_profile(j.at("profile").get<std::string>())
          : desk_profile();
  apply_json_overrides(c, j);
  c.validate();
  return c;
}

// Hash of the canonical model-section serialization (nlohmann dumps keys
// sorted): exactly the fields a checkpoint must agree on to be loadable and
// meaningful. Training-loop settings (epochs, lr, data) stay out.
inline std::uint64_t config_hash(const TrainConfig& c) {
  return fnv1a(config_to_json(c).at("model").dump());
}

}  // namespace gadc
