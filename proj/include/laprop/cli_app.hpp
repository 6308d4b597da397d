#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "laprop/config.hpp"
#include "laprop/csv.hpp"
#include "laprop/experiments.hpp"
#include "laprop/manifest.hpp"
#include "laprop/smooth.hpp"
#include "laprop/verify.hpp"

// Command-line front end. Exit codes: 0 success, 1 config/IO error,
// 2 verification failure.

namespace laprop::cli {

namespace fs = std::filesystem;

inline std::vector<OptimizerKind> parse_optimizers(const std::vector<std::string>& names) {
  std::vector<OptimizerKind> kinds;
  for (const auto& name : names) {
    const auto kind = optimizer_kind_from_string(name);
    if (!kind) throw FormatError("unknown optimizer: " + name);
    kinds.push_back(*kind);
  }
  return kinds;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

inline std::string join_doubles(const std::vector<double>& items) {
  std::vector<std::string> s;
  for (double v : items) s.push_back(format_double(v));
  return join(s);
}

struct OutputSink {
  fs::path dir;
  RunManifest manifest;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  explicit OutputSink(const std::string& out_dir, std::string command) {
    dir = out_dir;
    fs::create_directories(dir);
    manifest.command = std::move(command);
    manifest.started_at = RunManifest::now_iso8601();
  }

  std::string path_of(const std::string& name) {
    manifest.outputs.push_back(name);
    return (dir / name).string();
  }

  void finish() {
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.write((dir / "manifest.json").string());
  }
};

// --- bench rosenbrock ---------------------------------------------------------

inline RosenbrockBenchConfig rosenbrock_config_from(ConfigTree& cfg) {
  RosenbrockBenchConfig rb;
  rb.optimizers =
      parse_optimizers(cfg.get_string_list("optimizers", {"laprop", "adam", "amsgrad"}));
  rb.sigmas = cfg.get_double_list("sigma", rb.sigmas);
  rb.nus = cfg.get_double_list("nu", rb.nus);
  rb.lambdas = cfg.get_double_list("lambda", rb.lambdas);
  rb.mu = cfg.get_double("mu", rb.mu);
  rb.epsilon = cfg.get_double("epsilon", rb.epsilon);
  rb.n_seeds = static_cast<std::size_t>(cfg.get_int("seeds", static_cast<std::int64_t>(rb.n_seeds)));
  rb.seed_base = static_cast<std::uint64_t>(cfg.get_int("seed_base", 0));
  rb.delta = cfg.get_double("delta", rb.delta);
  rb.patience = cfg.get_int("patience", rb.patience);
  rb.low_noise_steps = cfg.get_int("low_noise_steps", rb.low_noise_steps);
  rb.high_noise_steps = cfg.get_int("high_noise_steps", rb.high_noise_steps);
  rb.high_noise_threshold = cfg.get_double("high_noise_threshold", rb.high_noise_threshold);
  return rb;
}

inline std::map<std::string, std::string> rosenbrock_resolved(const RosenbrockBenchConfig& rb,
                                                              bool record_trajectories) {
  std::vector<std::string> opts;
  for (auto k : rb.optimizers) opts.emplace_back(to_string(k));
  return {
      {"optimizers", join(opts)},
      {"sigma", join_doubles(rb.sigmas)},
      {"nu", join_doubles(rb.nus)},
      {"lambda", join_doubles(rb.lambdas)},
      {"mu", format_double(rb.mu)},
      {"epsilon", format_double(rb.epsilon)},
      {"seeds", std::to_string(rb.n_seeds)},
      {"seed_base", std::to_string(rb.seed_base)},
      {"delta", format_double(rb.delta)},
      {"patience", std::to_string(rb.patience)},
      {"low_noise_steps", std::to_string(rb.low_noise_steps)},
      {"high_noise_steps", std::to_string(rb.high_noise_steps)},
      {"high_noise_threshold", format_double(rb.high_noise_threshold)},
      {"record_trajectories", record_trajectories ? "true" : "false"},
  };
}

inline void write_trajectory_csv(const std::string& path, const TrajectoryRecord& rec) {
  CsvTable table;
  table.header = {"step", "loss", "update_inf_norm", "dist_to_opt", "regret", "status"};
  for (std::size_t i = 0; i < rec.rows.size(); ++i) {
    const auto& row = rec.rows[i];
    const bool last = i + 1 == rec.rows.size();
    table.rows.push_back({std::to_string(row.step), format_double(row.loss),
                          format_double(row.update_inf_norm), format_double(row.dist_to_opt),
                          format_double(row.regret),
                          last ? to_string(rec.status) : "running"});
  }
  write_csv(path, table);
}

inline int cmd_bench_rosenbrock(const std::string& config_path, const std::string& out_dir,
                                std::int64_t seeds_override, unsigned threads,
                                const std::string& command) {
  ConfigTree cfg = config_path.empty() ? ConfigTree::parse_string("", "<defaults>")
                                       : ConfigTree::parse_file(config_path);
  RosenbrockBenchConfig rb = rosenbrock_config_from(cfg);
  const bool record_trajectories = cfg.get_bool("record_trajectories", false);
  cfg.finish();
  if (seeds_override > 0) rb.n_seeds = static_cast<std::size_t>(seeds_override);
  rb.threads = threads;

  OutputSink sink(out_dir, command);
  sink.manifest.config = rosenbrock_resolved(rb, record_trajectories);
  for (std::size_t s = 0; s < rb.n_seeds; ++s) sink.manifest.seeds.push_back(rb.seed_base + s);

  const RosenbrockBench bench = rosenbrock_benchmark(rb);

  CsvTable cells;
  cells.header = {"optimizer", "sigma",            "lambda",      "nu",
                  "n_seeds",   "n_converged",      "failure_fraction", "median_steps"};
  for (const auto& c : bench.cells)
    cells.rows.push_back({to_string(c.kind), format_double(c.sigma), format_double(c.lambda),
                          format_double(c.nu), std::to_string(c.summary.n_total),
                          std::to_string(c.summary.n_converged),
                          format_double(c.summary.failure_fraction),
                          format_double(c.summary.median_steps)});
  write_csv(sink.path_of("rosenbrock_cells.csv"), cells);

  CsvTable tuned;
  tuned.header = {"optimizer", "sigma", "nu", "lambda_star", "n_converged",
                  "failure_fraction", "median_steps"};
  for (const auto& c : bench.tuned)
    tuned.rows.push_back({to_string(c.kind), format_double(c.sigma), format_double(c.nu),
                          format_double(c.lambda), std::to_string(c.summary.n_converged),
                          format_double(c.summary.failure_fraction),
                          format_double(c.summary.median_steps)});
  write_csv(sink.path_of("rosenbrock_tuned.csv"), tuned);

  if (record_trajectories) {
    for (const auto& c : bench.tuned) {
      RunConfig rc;
      rc.kind = c.kind;
      rc.hp.lambda = c.lambda;
      rc.hp.mu = rb.mu;
      rc.hp.nu = c.nu;
      rc.hp.epsilon = rb.epsilon;
      rc.max_steps = rb.steps_for(c.sigma);
      rc.convergence.delta = rb.delta;
      rc.convergence.patience = rb.patience;
      NoisyRosenbrockProblem problem{c.sigma};
      const auto rec = run(problem, rc, rb.seed_base);
      std::ostringstream name;
      name << "trajectory_" << to_string(c.kind) << "_sigma" << c.sigma << "_nu" << c.nu
           << ".csv";
      write_trajectory_csv(sink.path_of(name.str()), rec);
    }
  }

  nlohmann::json summary;
  summary["rng_algorithm"] = kRngAlgorithm;
  for (const auto& c : bench.tuned) {
    nlohmann::json row;
    row["optimizer"] = to_string(c.kind);
    row["sigma"] = c.sigma;
    row["nu"] = c.nu;
    row["lambda_star"] = c.lambda;
    row["median_steps"] = c.summary.median_steps;
    row["failure_fraction"] = c.summary.failure_fraction;
    summary["tuned"].push_back(row);
  }
  for (std::size_t ki = 0; ki < rb.optimizers.size(); ++ki)
    for (double sigma : rb.sigmas) {
      nlohmann::json row;
      row["optimizer"] = to_string(rb.optimizers[ki]);
      row["sigma"] = sigma;
      row["lambda_star"] = bench.lambda_star.at({static_cast<int>(ki), sigma});
      row["any_nu_converged_fraction"] = bench.any_nu_fraction(rb.optimizers[ki], sigma);
      summary["per_optimizer"].push_back(row);
    }
  std::ofstream(sink.path_of("summary.json")) << summary.dump(2) << '\n';
  sink.finish();
  return 0;
}

// --- bench deepfc ---------------------------------------------------------------

inline int cmd_bench_deepfc(const std::string& config_path, const std::string& out_dir,
                            std::int64_t seeds_override, const std::string& mnist_images,
                            const std::string& mnist_labels, const std::string& command) {
  ConfigTree cfg = config_path.empty() ? ConfigTree::parse_string("", "<defaults>")
                                       : ConfigTree::parse_file(config_path);
  std::string dataset = cfg.get_string("dataset", "synthetic");
  const auto examples = static_cast<std::size_t>(cfg.get_int("examples", 2000));
  const auto input_dim = static_cast<std::size_t>(cfg.get_int("input_dim", 784));
  const auto classes = static_cast<std::size_t>(cfg.get_int("classes", 10));
  const double spread = cfg.get_double("spread", 0.15);
  const auto data_seed = static_cast<std::uint64_t>(cfg.get_int("data_seed", 42));

  DeepFcConfig dc;
  dc.width = static_cast<std::size_t>(cfg.get_int("width", 32));
  dc.depth = static_cast<std::size_t>(cfg.get_int("depth", 100));
  dc.mu = cfg.get_double("mu", dc.mu);
  dc.nu = cfg.get_double("nu", dc.nu);
  dc.epsilon = cfg.get_double("epsilon", dc.epsilon);
  dc.lambda_sweep = cfg.get_double_list("lambda", dc.lambda_sweep);
  dc.batch = static_cast<std::size_t>(cfg.get_int("batch", 256));
  dc.max_steps = cfg.get_int("max_steps", dc.max_steps);
  dc.threshold_factor = cfg.get_double("threshold_factor", dc.threshold_factor);
  dc.n_seeds = static_cast<std::size_t>(cfg.get_int("seeds", 5));
  dc.seed_base = static_cast<std::uint64_t>(cfg.get_int("seed_base", 0));
  dc.selection_seed = static_cast<std::uint64_t>(cfg.get_int("selection_seed", 1000));
  dc.selection_steps = cfg.get_int("selection_steps", dc.selection_steps);
  dc.smooth_window = cfg.get_int("smooth_window", dc.smooth_window);
  dc.optimizers = parse_optimizers(cfg.get_string_list("optimizers", {"laprop", "adam"}));
  cfg.finish();
  if (seeds_override > 0) dc.n_seeds = static_cast<std::size_t>(seeds_override);
  if (!mnist_images.empty() || !mnist_labels.empty()) dataset = "mnist";

  DatasetHandle data;
  if (dataset == "mnist") {
    if (mnist_images.empty() || mnist_labels.empty())
      throw FormatError("mnist dataset needs --mnist-images and --mnist-labels");
    data = load_mnist_idx(mnist_images, mnist_labels, examples);
  } else if (dataset == "synthetic") {
    data = synth_classification(examples, input_dim, classes, data_seed, spread);
  } else {
    throw FormatError("dataset must be synthetic or mnist, got " + dataset);
  }
  dc.data = &data;

  OutputSink sink(out_dir, command);
  std::vector<std::string> opts;
  for (auto k : dc.optimizers) opts.emplace_back(to_string(k));
  sink.manifest.config = {
      {"dataset", dataset},
      {"examples", std::to_string(examples)},
      {"input_dim", std::to_string(data.input_dim)},
      {"classes", std::to_string(data.classes)},
      {"spread", format_double(spread)},
      {"data_seed", std::to_string(data_seed)},
      {"width", std::to_string(dc.width)},
      {"depth", std::to_string(dc.depth)},
      {"mu", format_double(dc.mu)},
      {"nu", format_double(dc.nu)},
      {"epsilon", format_double(dc.epsilon)},
      {"lambda", join_doubles(dc.lambda_sweep)},
      {"batch", std::to_string(dc.batch)},
      {"max_steps", std::to_string(dc.max_steps)},
      {"threshold_factor", format_double(dc.threshold_factor)},
      {"seeds", std::to_string(dc.n_seeds)},
      {"seed_base", std::to_string(dc.seed_base)},
      {"selection_seed", std::to_string(dc.selection_seed)},
      {"selection_steps", std::to_string(dc.selection_steps)},
      {"smooth_window", std::to_string(dc.smooth_window)},
      {"optimizers", join(opts)},
  };
  for (std::size_t s = 0; s < dc.n_seeds; ++s) sink.manifest.seeds.push_back(dc.seed_base + s);

  const DeepFcResult result = deepfc_protocol(dc);

  CsvTable runs;
  runs.header = {"optimizer", "lambda_star", "seed", "reached", "step_reached",
                 "best_smoothed", "status"};
  for (const auto& opt : result.per_optimizer)
    for (const auto& r : opt.runs)
      runs.rows.push_back({to_string(opt.kind), format_double(opt.lambda_star),
                           std::to_string(r.seed), r.reached ? "1" : "0",
                           std::to_string(r.step_reached), format_double(r.best_smoothed),
                           to_string(r.status)});
  write_csv(sink.path_of("deepfc_runs.csv"), runs);

  nlohmann::json summary;
  summary["depth"] = result.depth;
  summary["threshold"] = result.threshold;
  summary["rng_algorithm"] = kRngAlgorithm;
  for (const auto& opt : result.per_optimizer) {
    nlohmann::json row;
    row["optimizer"] = to_string(opt.kind);
    row["lambda_star"] = opt.lambda_star;
    row["n_reached"] = opt.n_reached;
    row["n_seeds"] = opt.runs.size();
    summary["per_optimizer"].push_back(row);
  }
  std::ofstream(sink.path_of("summary.json")) << summary.dump(2) << '\n';
  sink.finish();
  return 0;
}

// --- bench regret ------------------------------------------------------------------

inline int cmd_bench_regret(const std::string& config_path, const std::string& out_dir,
                            std::int64_t seeds_override, const std::string& command) {
  ConfigTree cfg = config_path.empty() ? ConfigTree::parse_string("", "<defaults>")
                                       : ConfigTree::parse_file(config_path);
  RegretExperimentConfig rc;
  const auto kind = optimizer_kind_from_string(cfg.get_string("optimizer", "laprop"));
  if (!kind) throw FormatError("unknown optimizer in config");
  rc.kind = *kind;
  rc.dim = static_cast<std::size_t>(cfg.get_int("dim", 4));
  rc.horizon = cfg.get_int("horizon", rc.horizon);
  rc.radius = cfg.get_double("radius", rc.radius);
  rc.lambda = cfg.get_double("lambda", rc.lambda);
  rc.mu = cfg.get_double("mu", rc.mu);
  rc.zeta = cfg.get_double("zeta", rc.zeta);
  rc.nu = cfg.get_double("nu", rc.nu);
  rc.epsilon = cfg.get_double("epsilon", rc.epsilon);
  rc.n_seeds = static_cast<std::size_t>(cfg.get_int("seeds", 5));
  rc.target_seed_base = static_cast<std::uint64_t>(cfg.get_int("target_seed_base", 500));
  const bool write_rounds = cfg.get_bool("write_rounds", false);
  cfg.finish();
  if (seeds_override > 0) rc.n_seeds = static_cast<std::size_t>(seeds_override);

  OutputSink sink(out_dir, command);
  sink.manifest.config = {
      {"optimizer", to_string(rc.kind)},
      {"dim", std::to_string(rc.dim)},
      {"horizon", std::to_string(rc.horizon)},
      {"radius", format_double(rc.radius)},
      {"lambda", format_double(rc.lambda)},
      {"mu", format_double(rc.mu)},
      {"zeta", format_double(rc.zeta)},
      {"nu", format_double(rc.nu)},
      {"epsilon", format_double(rc.epsilon)},
      {"seeds", std::to_string(rc.n_seeds)},
      {"target_seed_base", std::to_string(rc.target_seed_base)},
      {"write_rounds", write_rounds ? "true" : "false"},
  };
  for (std::size_t s = 0; s < rc.n_seeds; ++s) sink.manifest.seeds.push_back(s);

  const RegretExperimentResult result = regret_experiment(rc);

  CsvTable cps;
  cps.header = {"seed", "T", "regret", "regret_rate", "diameter_hat", "grad_inf_max"};
  for (std::size_t s = 0; s < result.per_seed.size(); ++s) {
    const auto& rep = result.per_seed[s];
    for (std::size_t i = 0; i < rep.checkpoints.size(); ++i)
      cps.rows.push_back({std::to_string(s), std::to_string(rep.checkpoints[i]),
                          format_double(rep.regret_at[i]), format_double(rep.regret_rate[i]),
                          format_double(rep.diameter_hat), format_double(rep.grad_inf_max)});
  }
  write_csv(sink.path_of("regret_checkpoints.csv"), cps);

  if (write_rounds) {
    for (std::size_t s = 0; s < result.per_seed.size(); ++s) {
      const auto& rep = result.per_seed[s];
      CsvTable rounds;
      rounds.header = {"t", "learner_loss", "star_loss", "cumulative_regret"};
      for (std::size_t t = 0; t < rep.learner_losses.size(); ++t)
        rounds.rows.push_back({std::to_string(t + 1), format_double(rep.learner_losses[t]),
                               format_double(rep.star_losses[t]),
                               format_double(rep.cumulative[t])});
      write_csv(sink.path_of("regret_rounds_seed" + std::to_string(s) + ".csv"), rounds);
    }
  }

  nlohmann::json summary;
  summary["rng_algorithm"] = kRngAlgorithm;
  for (std::size_t s = 0; s < result.per_seed.size(); ++s) {
    const auto& rep = result.per_seed[s];
    nlohmann::json row;
    row["seed"] = s;
    row["final_regret"] = rep.regret_at.back();
    row["final_rate"] = rep.regret_rate.back();
    row["diameter_hat"] = rep.diameter_hat;
    row["grad_inf_max"] = rep.grad_inf_max;
    summary["per_seed"].push_back(row);
  }
  std::ofstream(sink.path_of("summary.json")) << summary.dump(2) << '\n';
  sink.finish();
  return 0;
}

// --- bench grid ---------------------------------------------------------------------

inline int cmd_bench_grid(const std::string& config_path, const std::string& out_dir,
                          std::int64_t seeds_override, unsigned threads,
                          const std::string& command) {
  ConfigTree cfg = config_path.empty() ? ConfigTree::parse_string("", "<defaults>")
                                       : ConfigTree::parse_file(config_path);
  const std::string problem_name = cfg.get_string("problem", "stress");
  const double sigma = cfg.get_double("sigma", 0.1);
  const auto kind = optimizer_kind_from_string(cfg.get_string("optimizer", "adam"));
  if (!kind) throw FormatError("unknown optimizer in config");
  const auto mus = cfg.get_double_list("mu", {0.0, 0.5, 0.9});
  const auto nus = cfg.get_double_list("nu", {0.1, 0.5, 0.9, 0.999});
  const auto lambdas = cfg.get_double_list("lambda", {1e-3, 1e-2});
  auto n_seeds = static_cast<std::size_t>(cfg.get_int("seeds", 5));
  const auto seed_base = static_cast<std::uint64_t>(cfg.get_int("seed_base", 0));
  RunConfig base;
  base.kind = *kind;
  base.hp.epsilon = cfg.get_double("epsilon", 1e-15);
  base.max_steps = cfg.get_int("max_steps", 10000);
  base.convergence.delta = cfg.get_double("delta", 0.05);
  base.convergence.patience = cfg.get_int("patience", 50);
  base.ceiling.loss_limit = cfg.get_double("loss_ceiling", 1e8);
  base.ceiling.param_limit = cfg.get_double("param_ceiling", 1e8);
  cfg.finish();
  if (seeds_override > 0) n_seeds = static_cast<std::size_t>(seeds_override);

  std::vector<std::uint64_t> seeds(n_seeds);
  for (std::size_t s = 0; s < n_seeds; ++s) seeds[s] = seed_base + s;

  std::vector<GridCell> cells;
  if (problem_name == "stress") {
    HeavyTailStressProblem problem;
    cells = grid_search(problem, base, mus, nus, lambdas, seeds, threads);
  } else if (problem_name == "rosenbrock") {
    NoisyRosenbrockProblem problem{sigma};
    cells = grid_search(problem, base, mus, nus, lambdas, seeds, threads);
  } else {
    throw FormatError("problem must be stress or rosenbrock, got " + problem_name);
  }

  OutputSink sink(out_dir, command);
  sink.manifest.config = {
      {"problem", problem_name},
      {"sigma", format_double(sigma)},
      {"optimizer", to_string(*kind)},
      {"mu", join_doubles({mus.begin(), mus.end()})},
      {"nu", join_doubles({nus.begin(), nus.end()})},
      {"lambda", join_doubles({lambdas.begin(), lambdas.end()})},
      {"seeds", std::to_string(n_seeds)},
      {"seed_base", std::to_string(seed_base)},
      {"epsilon", format_double(base.hp.epsilon)},
      {"max_steps", std::to_string(base.max_steps)},
      {"delta", format_double(base.convergence.delta)},
      {"patience", std::to_string(base.convergence.patience)},
      {"loss_ceiling", format_double(base.ceiling.loss_limit)},
      {"param_ceiling", format_double(base.ceiling.param_limit)},
  };
  sink.manifest.seeds = seeds;

  CsvTable table;
  table.header = {"mu",      "nu",       "lambda",        "n_converged",
                  "failure_fraction", "median_steps", "divergence_fraction",
                  "marked_divergent", "mean_final_loss"};
  for (const auto& c : cells)
    table.rows.push_back({format_double(c.mu), format_double(c.nu), format_double(c.lambda),
                          std::to_string(c.summary.n_converged),
                          format_double(c.summary.failure_fraction),
                          format_double(c.summary.median_steps),
                          format_double(c.divergence_fraction),
                          c.marked_divergent ? "1" : "0", format_double(c.mean_final_loss)});
  write_csv(sink.path_of("grid.csv"), table);

  nlohmann::json summary;
  summary["rng_algorithm"] = kRngAlgorithm;
  summary["n_cells"] = cells.size();
  std::size_t divergent = 0;
  for (const auto& c : cells) divergent += c.marked_divergent;
  summary["n_divergent_cells"] = divergent;
  std::ofstream(sink.path_of("summary.json")) << summary.dump(2) << '\n';
  sink.finish();
  return 0;
}

// --- verify ---------------------------------------------------------------------------

inline int cmd_verify(const std::string& battery, const std::string& out_dir,
                      std::uint64_t seed, const std::string& command) {
  OutputSink sink(out_dir, command);
  bool all_ok = true;

  auto do_bounds = [&] {
    const auto reports = run_bound_battery(seed);
    nlohmann::json j;
    bool ok = true;
    for (const auto& rep : reports) {
      nlohmann::json row;
      row["optimizer"] = to_string(rep.kind);
      row["mu"] = rep.mu;
      row["nu"] = rep.nu;
      row["epsilon"] = rep.epsilon;
      row["distribution"] = to_string(rep.dist);
      row["bound"] = rep.bound;
      if (!std::isnan(rep.alt_bound)) row["alt_bound"] = rep.alt_bound;
      row["empirical_max"] = rep.empirical_max;
      row["outcome"] = to_string(rep.outcome);
      j["reports"].push_back(row);
      if (rep.outcome == CheckOutcome::Fail) ok = false;
    }
    j["pass"] = ok;
    std::ofstream(sink.path_of("bounds.json")) << j.dump(2) << '\n';
    std::cout << "bounds: " << (ok ? "pass" : "FAIL") << " (" << reports.size()
              << " reports)\n";
    all_ok = all_ok && ok;
  };

  auto do_heavytail = [&] {
    const auto battery_result = run_heavy_tail_battery(seed + 1000);
    nlohmann::json j;
    j["mu"] = battery_result.mu;
    j["sample_sizes"] = battery_result.sizes;
    j["count_exceeds_10"] = battery_result.count_exceeds_10;
    j["count_strict_growth"] = battery_result.count_strict_growth;
    j["laprop_capped"] = battery_result.laprop_capped;
    for (const auto& rep : battery_result.reports) {
      nlohmann::json row;
      row["adam_max"] = rep.adam_max;
      row["adam_p999"] = rep.adam_p999;
      row["laprop_max"] = rep.laprop_max;
      j["per_seed"].push_back(row);
    }
    const bool ok = battery_result.pass();
    j["pass"] = ok;
    std::ofstream(sink.path_of("heavytail.json")) << j.dump(2) << '\n';
    std::cout << "heavytail: " << (ok ? "pass" : "FAIL") << " (max>10 on "
              << battery_result.count_exceeds_10 << "/" << battery_result.n_seeds()
              << " seeds)\n";
    all_ok = all_ok && ok;
  };

  auto do_equivalence = [&] {
    const auto battery_result = run_equivalence_battery(1000, seed + 2000);
    nlohmann::json j;
    bool ok = battery_result.pass();
    for (const auto& e : battery_result.entries) {
      nlohmann::json row;
      row["pair"] = to_string(e.pair);
      row["deviation"] = e.deviation;
      row["tolerance"] = e.tolerance;
      j["pairs"].push_back(row);
    }
    j["pass"] = ok;
    std::ofstream(sink.path_of("equivalence.json")) << j.dump(2) << '\n';
    std::cout << "equivalence: " << (ok ? "pass" : "FAIL") << "\n";
    all_ok = all_ok && ok;
  };

  auto do_gradcheck = [&] {
    const auto battery_result = run_gradcheck_battery(20, seed + 3000);
    nlohmann::json j;
    j["tolerance"] = battery_result.tolerance;
    j["worst_rel_error"] = battery_result.worst;
    j["n_nets"] = battery_result.entries.size();
    const bool ok = battery_result.pass();
    j["pass"] = ok;
    std::ofstream(sink.path_of("gradcheck.json")) << j.dump(2) << '\n';
    std::cout << "gradcheck: " << (ok ? "pass" : "FAIL") << " (worst rel err "
              << battery_result.worst << ")\n";
    all_ok = all_ok && ok;
  };

  if (battery == "bounds") do_bounds();
  else if (battery == "heavytail") do_heavytail();
  else if (battery == "equivalence") do_equivalence();
  else if (battery == "gradcheck") do_gradcheck();
  else if (battery == "all") {
    do_bounds();
    do_heavytail();
    do_equivalence();
    do_gradcheck();
  } else {
    throw FormatError("unknown battery: " + battery);
  }
  sink.finish();
  return all_ok ? 0 : 2;
}

// --- entry point ------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
  std::string command;
  for (int i = 0; i < argc; ++i) command += std::string(i ? " " : "") + argv[i];

  CLI::App app{"laprop optimizer benchmarks and verification"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::int64_t seeds_override = 0;
  unsigned threads = 1;
  std::string mnist_images, mnist_labels;

  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out", out_dir, "output directory")->envname("LAPROP_OUT");
    sub->add_option("--seeds", seeds_override, "override the number of seeds");
    sub->add_option("--threads", threads, "worker threads for independent runs");
  };

  auto* bench = app.add_subcommand("bench", "run an experiment");
  bench->require_subcommand(1);
  auto* rosen = bench->add_subcommand("rosenbrock", "noisy two-parameter valley sweep");
  add_common(rosen);
  auto* deepfc = bench->add_subcommand("deepfc", "deep fully-connected training initiation");
  add_common(deepfc);
  deepfc->add_option("--mnist-images", mnist_images, "IDX image file");
  deepfc->add_option("--mnist-labels", mnist_labels, "IDX label file");
  auto* regret = bench->add_subcommand("regret", "online convex quadratic regret");
  add_common(regret);
  auto* grid = bench->add_subcommand("grid", "mu/nu/lambda grid search");
  add_common(grid);

  auto* verify = app.add_subcommand("verify", "run a verification battery");
  std::string battery = "all";
  std::uint64_t verify_seed = 12345;
  verify->add_option("battery", battery, "bounds|heavytail|equivalence|gradcheck|all");
  verify->add_option("--out", out_dir, "output directory")->envname("LAPROP_OUT");
  verify->add_option("--seed", verify_seed, "battery seed");

  auto* smooth = app.add_subcommand("smooth", "smooth numeric CSV columns");
  std::string smooth_in, smooth_out;
  std::int64_t window = 0;
  double gaussian_sigma = 0.0;
  smooth->add_option("--input", smooth_in, "input CSV")->required();
  smooth->add_option("--output", smooth_out, "output CSV")->required();
  smooth->add_option("--window", window, "moving-average window");
  smooth->add_option("--gaussian-sigma", gaussian_sigma, "gaussian kernel sigma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (rosen->parsed())
      return cmd_bench_rosenbrock(config_path, out_dir, seeds_override, threads, command);
    if (deepfc->parsed())
      return cmd_bench_deepfc(config_path, out_dir, seeds_override, mnist_images,
                              mnist_labels, command);
    if (regret->parsed())
      return cmd_bench_regret(config_path, out_dir, seeds_override, command);
    if (grid->parsed())
      return cmd_bench_grid(config_path, out_dir, seeds_override, threads, command);
    if (verify->parsed()) return cmd_verify(battery, out_dir, verify_seed, command);
    if (smooth->parsed()) {
      smooth_csv(smooth_in, smooth_out, window, gaussian_sigma);
      return 0;
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace laprop::cli
