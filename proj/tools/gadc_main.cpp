// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: data generation, training, evaluation, single-sample
// completion, gradient checks, attention benchmarks, and the ablation grid.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gadc/gadc.hpp"

namespace {

using namespace gadc;

struct CommonFlags {
  std::string config_path;
  std::string profile = "desk";
  std::uint64_t seed = 0;  // 0 = keep the profile/config value
  std::string aca;
  std::string gcmf;
  bool gcmf_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--profile", f.profile, "base profile: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", f.seed, "override the configured seed");
  cmd->add_option("--aca", f.aca,
                  "neighborhood query: none, knn, ball, adaptive")
      ->check(CLI::IsMember({"none", "knn", "ball", "adaptive"}));
  cmd->add_option("--gcmf", f.gcmf,
                  "scales with full gated fusion, e.g. 1/4,1/2,1/1; 'none' "
                  "keeps additive fusion, 'off' disables fusion")
      ->each([&f](const std::string&) { f.gcmf_set = true; });
}

TrainConfig resolve_config(const CommonFlags& f) {
  TrainConfig cfg = f.config_path.empty() ? named_profile(f.profile)
                                          : load_config_file(f.config_path);
  if (f.seed != 0) cfg.seed = f.seed;
  if (!f.aca.empty()) cfg.model.aca.strategy = parse_strategy(f.aca);
  if (f.gcmf_set) cfg.model.fuse = parse_gcmf_scales(f.gcmf);
  cfg.validate();
  return cfg;
}

std::string sample_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%06zu", i);
  return buf;
}

int cmd_gen_data(const CommonFlags& flags, const std::string& out,
                 std::size_t count) {
  TrainConfig cfg = resolve_config(flags);
  std::filesystem::create_directories(out);
  for (std::size_t i = 0; i < count; ++i) {
    SceneSample s = generate_scene(cfg.seed * 1000003ull + i, cfg.scene);
    s.id = sample_dir_name(i);
    save_sample(std::filesystem::path(out) / s.id, s);
  }
  std::cout << "wrote " << count << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& data,
              const std::string& out, std::size_t max_samples,
              std::size_t epochs_override, const std::string& loss_log_path) {
  TrainConfig cfg = resolve_config(flags);
  if (max_samples) cfg.max_samples = max_samples;
  if (epochs_override) cfg.epochs = epochs_override;
  const auto samples = load_prepared(data, cfg.model, cfg.max_samples);
  std::cout << "training on " << samples.size() << " samples, "
            << cfg.epochs << " epochs, seed " << cfg.seed << "\n";
  Trainer trainer(cfg);
  std::ofstream log;
  if (!loss_log_path.empty()) {
    log.open(loss_log_path);
    if (!log) throw input_error("cannot open loss log: " + loss_log_path);
  }
  TrainStats stats = trainer.fit(samples, log.is_open() ? &log : nullptr, out,
                                 &std::cout);
  Metrics m = trainer.evaluate(samples);
  std::cout << Metrics::csv_header() << "\n" << m.csv() << "\n";
  return 0;
}

// Rebuilds the trainer from a checkpoint; the config must hash-match the one
// the checkpoint was trained with.
Trainer restore_trainer(const TrainConfig& cfg, const std::string& ckpt) {
  Trainer trainer(cfg);
  const LoadedMeta meta =
      load_checkpoint(ckpt, trainer.model().params(), &trainer.optimizer());
  if (meta.config_hash != config_hash(cfg))
    throw config_error(
        "checkpoint was trained with a different configuration (hash "
        "mismatch); pass the matching --config/--profile flags");
  return trainer;
}

int cmd_eval(const CommonFlags& flags, const std::string& data,
             const std::string& ckpt, std::size_t max_samples) {
  TrainConfig cfg = resolve_config(flags);
  Trainer trainer = restore_trainer(cfg, ckpt);
  const auto samples = load_prepared(data, cfg.model, max_samples);
  Metrics m = trainer.evaluate(samples);
  std::cout << Metrics::csv_header() << "\n" << m.csv() << "\n";
  return 0;
}

int cmd_complete(const CommonFlags& flags, const std::string& sample_dir,
                 const std::string& ckpt, const std::string& out_path) {
  TrainConfig cfg = resolve_config(flags);
  Trainer trainer = restore_trainer(cfg, ckpt);
  const SceneSample sample = load_sample(sample_dir);
  const PreparedSample prepared = prepare_sample(sample, cfg.model);
  const DepthMap pred = trainer.infer(prepared);
  write_depth_pgm(out_path, pred);
  bool masked = false;
  for (const auto m : sample.mask) masked = masked || m != 0;
  if (masked) {
    Metrics m = compute_metrics(pred, sample.gt_depth, sample.mask);
    std::cout << Metrics::csv_header() << "\n" << m.csv() << "\n";
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t seed_count, double tol) {
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t i = 0; i < seed_count; ++i) {
    const auto results = run_grad_suite(seed + i);
    for (const auto& r : results) {
      if (r.max_err > worst) {
        worst = r.max_err;
        worst_name = r.name;
      }
      std::cout << "seed " << (seed + i) << " " << r.name << " max_err "
                << r.max_err << "\n";
    }
  }
  std::cout << "worst " << worst_name << " " << worst << " tol " << tol << "\n";
  if (worst >= tol)
    throw numeric_error("gradient check failed: " + worst_name +
                        " err " + g17(worst));
  return 0;
}

double time_linear_attention(std::size_t n, std::size_t d, std::size_t runs,
                             std::uint64_t seed) {
  NoGradGuard guard;
  Rng rng(seed);
  std::vector<float> qv(n * d), kv(n * d), vv(n * d);
  for (auto& x : qv) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : kv) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : vv) x = static_cast<float>(rng.uniform(-1, 1));
  auto q = Tensor<float>::from_data({n, d}, qv);
  auto k = Tensor<float>::from_data({n, d}, kv);
  auto v = Tensor<float>::from_data({n, d}, vv);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = linear_attention(q, k, v);
    const auto t1 = std::chrono::steady_clock::now();
    volatile float sink = out.vals()[0];
    (void)sink;
    best = std::min(best,
                    std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

int cmd_bench(std::size_t n, std::size_t d, std::size_t runs) {
  const double t1 = time_linear_attention(n, d, runs, 7);
  const double t2 = time_linear_attention(2 * n, d, runs, 7);
  std::printf("linear attention d=%zu runs=%zu\n", d, runs);
  std::printf("  N=%zu  best %.6f s\n", n, t1);
  std::printf("  N=%zu  best %.6f s\n", 2 * n, t2);
  std::printf("  ratio %.3f\n", t2 / t1);
  return 0;
}

int cmd_ablate(const CommonFlags& flags, const std::string& data,
               const std::string& out_csv, std::size_t sample_count,
               std::size_t epochs, const std::vector<std::uint64_t>& seeds,
               bool full_grid) {
  TrainConfig cfg = resolve_config(flags);
  cfg.epochs = epochs;
  std::vector<SceneSample> samples;
  if (!data.empty()) {
    for (const auto& dir : list_sample_dirs(data)) {
      if (samples.size() >= sample_count) break;
      samples.push_back(load_sample(dir));
    }
  } else {
    for (std::size_t i = 0; i < sample_count; ++i) {
      SceneSample s = generate_scene(cfg.seed * 1000003ull + i, cfg.scene);
      s.id = sample_dir_name(i);
      samples.push_back(std::move(s));
    }
  }
  const auto cells =
      run_ablation(cfg, samples, seeds, full_grid, &std::cout);
  const std::string csv = ablation_csv(cells);
  std::cout << csv;
  if (!out_csv.empty()) {
    std::ofstream os(out_csv);
    if (!os) throw input_error("cannot open output csv: " + out_csv);
    os << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometry-assisted depth completion for transparent objects"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* gen = app.add_subcommand("gen-data", "generate synthetic samples");
  std::string gen_out = "data";
  std::size_t gen_count = 100;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--count", gen_count, "number of samples");
  add_common(gen, flags);

  auto* train = app.add_subcommand("train", "train a model");
  std::string train_data, train_out = "runs/train", train_loss_log;
  std::size_t train_max = 0, train_epochs = 0;
  train->add_option("--data", train_data, "sample directory")->required();
  train->add_option("--out", train_out, "checkpoint directory");
  train->add_option("--max-samples", train_max, "cap on samples (0 = all)");
  train->add_option("--epochs", train_epochs, "override epoch count");
  train->add_option("--loss-log", train_loss_log, "per-iteration CSV log");
  add_common(train, flags);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt;
  std::size_t eval_max = 0;
  eval->add_option("--data", eval_data, "sample directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--max-samples", eval_max, "cap on samples (0 = all)");
  add_common(eval, flags);

  auto* complete = app.add_subcommand("complete", "complete one sample");
  std::string comp_sample, comp_ckpt, comp_out = "completed.pgm";
  complete->add_option("--sample", comp_sample, "sample directory")->required();
  complete->add_option("--checkpoint", comp_ckpt, "checkpoint file")
      ->required();
  complete->add_option("--out", comp_out, "output depth PGM");
  add_common(complete, flags);

  auto* grad = app.add_subcommand("gradcheck", "run the gradient suite");
  std::uint64_t grad_seed = 1;
  std::size_t grad_seeds = 1;
  double grad_tol = 1e-4;
  grad->add_option("--seed", grad_seed, "first seed");
  grad->add_option("--seeds", grad_seeds, "number of seeds");
  grad->add_option("--tol", grad_tol, "failure threshold");

  auto* bench = app.add_subcommand("bench", "time linear attention at N, 2N");
  std::size_t bench_n = 4096, bench_d = 32, bench_runs = 5;
  bench->add_option("--n", bench_n, "base token count");
  bench->add_option("--d", bench_d, "token dimension");
  bench->add_option("--runs", bench_runs, "repetitions (best time wins)");

  auto* ablate = app.add_subcommand("ablate", "train the ablation grid");
  std::string ab_data, ab_out = "ablation.csv";
  std::size_t ab_samples = 100, ab_epochs = 10;
  std::vector<std::uint64_t> ab_seeds{1, 2, 3};
  bool ab_full = false;
  ablate->add_option("--data", ab_data,
                     "sample directory (default: generate in memory)");
  ablate->add_option("--out", ab_out, "output CSV path");
  ablate->add_option("--samples", ab_samples, "samples per run");
  ablate->add_option("--epochs", ab_epochs, "epochs per run");
  ablate->add_option("--seeds", ab_seeds, "training seeds");
  ablate->add_flag("--full", ab_full, "include the partial-fusion rows");
  add_common(ablate, flags);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(flags, gen_out, gen_count);
    if (train->parsed())
      return cmd_train(flags, train_data, train_out, train_max, train_epochs,
                       train_loss_log);
    if (eval->parsed()) return cmd_eval(flags, eval_data, eval_ckpt, eval_max);
    if (complete->parsed())
      return cmd_complete(flags, comp_sample, comp_ckpt, comp_out);
    if (grad->parsed()) return cmd_gradcheck(grad_seed, grad_seeds, grad_tol);
    if (bench->parsed()) return cmd_bench(bench_n, bench_d, bench_runs);
    if (ablate->parsed())
      return cmd_ablate(flags, ab_data, ab_out, ab_samples, ab_epochs,
                        ab_seeds, ab_full);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const gadc::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const gadc::input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const gadc::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
}
