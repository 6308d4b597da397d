#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "laprop/dataset.hpp"
#include "laprop/harness.hpp"

// Concrete experiment protocols: the noisy-Rosenbrock noise/decay sweep, the
// deep fully-connected training-initiation study, the two-layer instability
// demo and the online-quadratic regret study. The CLI and the acceptance
// suite both drive these.

namespace laprop {

// --- noisy rosenbrock sweep -------------------------------------------------

struct RosenbrockBenchConfig {
  std::vector<OptimizerKind> optimizers{OptimizerKind::LaProp, OptimizerKind::Adam,
                                        OptimizerKind::AmsGrad};
  std::vector<double> sigmas{0.04, 0.12};
  std::vector<double> nus{0.3, 0.6, 0.9, 0.98};
  std::vector<double> lambdas{1e-3, 3e-3, 1e-2};
  double mu = 0.9;
  double epsilon = 1e-15;
  std::size_t n_seeds = 20;
  std::uint64_t seed_base = 0;
  double delta = 0.05;
  std::int64_t patience = 50;
  std::int64_t low_noise_steps = 3000;
  std::int64_t high_noise_steps = 10000;
  double high_noise_threshold = 0.12;
  unsigned threads = 1;

  std::int64_t steps_for(double sigma) const {
    return sigma >= high_noise_threshold ? high_noise_steps : low_noise_steps;
  }
};

struct RosenbrockCell {
  OptimizerKind kind;
  double sigma = 0.0;
  double lambda = 0.0;
  double nu = 0.0;
  ConvergenceSummary summary;
  std::vector<char> converged;  // per seed
};

struct RosenbrockBench {
  RosenbrockBenchConfig config;
  std::vector<RosenbrockCell> cells;                        // every (kind, sigma, lambda, nu)
  std::map<std::pair<int, double>, double> lambda_star;     // (kind index, sigma) -> lambda
  std::vector<RosenbrockCell> tuned;                        // cells at the tuned lambda

  const RosenbrockCell& tuned_cell(OptimizerKind kind, double sigma, double nu) const {
    for (const auto& c : tuned)
      if (c.kind == kind && c.sigma == sigma && c.nu == nu) return c;
    throw std::invalid_argument("tuned cell not found");
  }

  /// Fraction of seeds that converged for at least one tested nu.
  double any_nu_fraction(OptimizerKind kind, double sigma) const {
    std::vector<char> any;
    for (const auto& c : tuned) {
      if (c.kind != kind || c.sigma != sigma) continue;
      if (any.empty()) any.assign(c.converged.size(), 0);
      for (std::size_t s = 0; s < c.converged.size(); ++s)
        if (c.converged[s]) any[s] = 1;
    }
    if (any.empty()) throw std::invalid_argument("no tuned cells for that optimizer/sigma");
    double n = 0.0;
    for (char v : any) n += v;
    return n / static_cast<double>(any.size());
  }
};

inline RosenbrockBench rosenbrock_benchmark(const RosenbrockBenchConfig& config) {
  RosenbrockBench bench;
  bench.config = config;
  const std::size_t n_kinds = config.optimizers.size();
  const std::size_t n_cells =
      n_kinds * config.sigmas.size() * config.lambdas.size() * config.nus.size();
  bench.cells.resize(n_cells);

  auto eval_cell = [&](std::size_t idx) {
    std::size_t rest = idx;
    const std::size_t ni = rest % config.nus.size();
    rest /= config.nus.size();
    const std::size_t li = rest % config.lambdas.size();
    rest /= config.lambdas.size();
    const std::size_t si = rest % config.sigmas.size();
    const std::size_t ki = rest / config.sigmas.size();

    RosenbrockCell cell;
    cell.kind = config.optimizers[ki];
    cell.sigma = config.sigmas[si];
    cell.lambda = config.lambdas[li];
    cell.nu = config.nus[ni];

    RunConfig rc;
    rc.kind = cell.kind;
    rc.hp.lambda = cell.lambda;
    rc.hp.mu = config.mu;
    rc.hp.nu = cell.nu;
    rc.hp.epsilon = config.epsilon;
    rc.max_steps = config.steps_for(cell.sigma);
    rc.convergence.delta = config.delta;
    rc.convergence.patience = config.patience;
    rc.store_rows = false;

    NoisyRosenbrockProblem problem{cell.sigma};
    std::vector<TrajectoryRecord> records;
    records.reserve(config.n_seeds);
    cell.converged.resize(config.n_seeds, 0);
    for (std::size_t s = 0; s < config.n_seeds; ++s) {
      records.push_back(run(problem, rc, config.seed_base + s));
      cell.converged[s] = records.back().status == RunStatus::Converged;
    }
    cell.summary = convergence_time(records);
    bench.cells[idx] = std::move(cell);
  };

  if (config.threads <= 1) {
    for (std::size_t idx = 0; idx < n_cells; ++idx) eval_cell(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < config.threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_cells; i = next.fetch_add(1))
          eval_cell(i);
      });
    for (auto& th : pool) th.join();
  }

  // Tune lambda per (optimizer, sigma): most convergences across nu x seeds,
  // then the smaller median sum, then the smaller lambda.
  for (std::size_t ki = 0; ki < n_kinds; ++ki) {
    for (double sigma : config.sigmas) {
      double best_lambda = config.lambdas.front();
      double best_count = -1.0, best_median_sum = 0.0;
      for (double lambda : config.lambdas) {
        double count = 0.0, median_sum = 0.0;
        for (const auto& c : bench.cells) {
          if (c.kind != config.optimizers[ki] || c.sigma != sigma || c.lambda != lambda)
            continue;
          count += static_cast<double>(c.summary.n_converged);
          median_sum += std::isnan(c.summary.median_steps)
                            ? static_cast<double>(config.steps_for(sigma))
                            : c.summary.median_steps;
        }
        if (count > best_count ||
            (count == best_count && median_sum < best_median_sum)) {
          best_count = count;
          best_median_sum = median_sum;
          best_lambda = lambda;
        }
      }
      bench.lambda_star[{static_cast<int>(ki), sigma}] = best_lambda;
      for (const auto& c : bench.cells)
        if (c.kind == config.optimizers[ki] && c.sigma == sigma && c.lambda == best_lambda)
          bench.tuned.push_back(c);
    }
  }
  return bench;
}

// --- smoothed minibatch training loop ----------------------------------------

struct SmoothedTrainConfig {
  OptimizerKind kind = OptimizerKind::LaProp;
  HyperParams hp{};
  std::int64_t max_steps = 5000;
  std::int64_t smooth_window = 50;
  double reach_threshold = 0.0;  // <= 0 disables the reach check
  bool stop_on_reach = true;
  double spike_factor = 0.0;     // <= 0 disables spike detection
  std::int64_t spike_start = 250;
  double spike_min_floor = 0.01;  // keeps the ratio meaningful once loss ~ 0
  DivergenceCeiling ceiling{};
};

struct SmoothedTrainResult {
  RunStatus status = RunStatus::Exhausted;
  std::int64_t steps_run = 0;
  bool reached = false;
  std::int64_t step_reached = 0;
  double best_smoothed = std::numeric_limits<double>::infinity();
  double final_smoothed = std::numeric_limits<double>::quiet_NaN();
  bool spiked = false;
  std::int64_t first_spike_step = 0;
  double max_spike_ratio = 0.0;
};

/// Minibatch training tracking the trailing-window mean of the batch loss.
/// `reached` fires when the smoothed loss dips under the threshold; a spike
/// is a smoothed loss exceeding spike_factor times its running minimum. A
/// divergence (ceiling breach or non-finite forward/backward) counts as a
/// spike: it is the limiting case of one.
inline SmoothedTrainResult train_mlp_smoothed(MlpClassificationProblem& problem,
                                              const SmoothedTrainConfig& cfg,
                                              std::uint64_t seed) {
  cfg.hp.validate();
  Rng rng(seed);
  std::vector<double> theta = problem.init(rng);
  Optimizer opt(cfg.kind, cfg.hp, theta.size());

  SmoothedTrainResult res;
  std::vector<double> window(cfg.smooth_window, 0.0);
  double window_sum = 0.0;
  double running_min = std::numeric_limits<double>::infinity();
  LossGrad lg;
  StepOutput out;

  for (std::int64_t t = 1; t <= cfg.max_steps; ++t) {
    res.steps_run = t;
    bool diverged = false;
    try {
      problem.sample(t, theta, rng, lg);
      if (!std::isfinite(lg.loss) || lg.loss > cfg.ceiling.loss_limit) diverged = true;
    } catch (const NonFiniteError&) {
      diverged = true;
    }
    if (!diverged) {
      try {
        opt.step(lg.grad, theta, out);
      } catch (const NonFiniteError&) {
        diverged = true;
      }
    }
    if (!diverged) {
      double max_abs = 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] += out.delta[i];
        max_abs = std::max(max_abs, std::abs(theta[i]));
      }
      if (!std::isfinite(max_abs) || max_abs > cfg.ceiling.param_limit) diverged = true;
    }
    if (diverged) {
      res.status = RunStatus::Diverged;
      if (cfg.spike_factor > 0.0) {
        res.spiked = true;
        res.first_spike_step = res.first_spike_step == 0 ? t : res.first_spike_step;
        res.max_spike_ratio = std::numeric_limits<double>::infinity();
      }
      return res;
    }

    const std::size_t slot = static_cast<std::size_t>((t - 1) % cfg.smooth_window);
    window_sum += lg.loss - window[slot];
    window[slot] = lg.loss;
    if (t < cfg.smooth_window) continue;
    const double smoothed = window_sum / static_cast<double>(cfg.smooth_window);
    res.final_smoothed = smoothed;
    res.best_smoothed = std::min(res.best_smoothed, smoothed);

    if (cfg.spike_factor > 0.0 && t >= cfg.spike_start) {
      running_min = std::min(running_min, smoothed);
      const double ratio = smoothed / std::max(running_min, cfg.spike_min_floor);
      res.max_spike_ratio = std::max(res.max_spike_ratio, ratio);
      if (ratio > cfg.spike_factor && !res.spiked) {
        res.spiked = true;
        res.first_spike_step = t;
      }
    }

    if (cfg.reach_threshold > 0.0 && !res.reached && smoothed < cfg.reach_threshold) {
      res.reached = true;
      res.step_reached = t;
      if (cfg.stop_on_reach) {
        res.status = RunStatus::Exhausted;
        return res;
      }
    }
  }
  res.status = RunStatus::Exhausted;
  return res;
}

// --- deep fully-connected training initiation ---------------------------------

struct DeepFcConfig {
  const DatasetHandle* data = nullptr;
  std::size_t width = 32;
  std::size_t depth = 100;
  double mu = 0.8;
  double nu = 0.96;
  double epsilon = 1e-26;
  std::vector<double> lambda_sweep{4e-4, 1e-4, 4e-5, 1e-5};
  std::size_t batch = 256;
  std::int64_t max_steps = 5000;
  double threshold_factor = 0.8;  // of ln(classes)
  std::size_t n_seeds = 5;
  std::uint64_t seed_base = 0;
  std::uint64_t selection_seed = 1000;
  std::int64_t selection_steps = 2000;
  std::int64_t smooth_window = 50;
  std::vector<OptimizerKind> optimizers{OptimizerKind::LaProp, OptimizerKind::Adam};

  double threshold() const {
    return threshold_factor * std::log(static_cast<double>(data->classes));
  }
};

struct DeepFcRun {
  std::uint64_t seed = 0;
  bool reached = false;
  std::int64_t step_reached = 0;
  double best_smoothed = 0.0;
  RunStatus status = RunStatus::Exhausted;
};

struct DeepFcOptimizerResult {
  OptimizerKind kind;
  double lambda_star = 0.0;
  std::vector<DeepFcRun> runs;
  std::size_t n_reached = 0;
};

struct DeepFcResult {
  std::size_t depth = 0;
  double threshold = 0.0;
  std::vector<DeepFcOptimizerResult> per_optimizer;

  const DeepFcOptimizerResult& of(OptimizerKind kind) const {
    for (const auto& r : per_optimizer)
      if (r.kind == kind) return r;
    throw std::invalid_argument("optimizer not part of this result");
  }
};

/// For each optimizer: pick the best learning rate from the sweep on a
/// held-out selection seed (earliest threshold crossing, else lowest smoothed
/// loss), then evaluate the evaluation seeds in full.
inline DeepFcResult deepfc_protocol(const DeepFcConfig& config) {
  if (config.data == nullptr) throw std::invalid_argument("deepfc: dataset required");
  DeepFcResult result;
  result.depth = config.depth;
  result.threshold = config.threshold();

  MlpClassificationProblem problem;
  problem.data = config.data;
  problem.net = NetworkSpec{config.data->input_dim, config.width, config.depth,
                            config.data->classes};
  problem.batch_size = config.batch;

  for (OptimizerKind kind : config.optimizers) {
    SmoothedTrainConfig tc;
    tc.kind = kind;
    tc.hp.mu = config.mu;
    tc.hp.nu = config.nu;
    tc.hp.epsilon = config.epsilon;
    tc.smooth_window = config.smooth_window;
    tc.reach_threshold = result.threshold;
    tc.stop_on_reach = true;

    DeepFcOptimizerResult opt_result;
    opt_result.kind = kind;
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : config.lambda_sweep) {
      tc.hp.lambda = lambda;
      tc.max_steps = config.selection_steps;
      const auto sel = train_mlp_smoothed(problem, tc, config.selection_seed);
      // Crossing the threshold early outranks any not-yet-crossed loss level.
      const double score = sel.reached
                               ? static_cast<double>(sel.step_reached) -
                                     static_cast<double>(config.max_steps)
                               : sel.best_smoothed;
      if (score < best_score) {
        best_score = score;
        opt_result.lambda_star = lambda;
      }
    }

    tc.hp.lambda = opt_result.lambda_star;
    tc.max_steps = config.max_steps;
    for (std::size_t s = 0; s < config.n_seeds; ++s) {
      const std::uint64_t seed = config.seed_base + s;
      const auto r = train_mlp_smoothed(problem, tc, seed);
      DeepFcRun row;
      row.seed = seed;
      row.reached = r.reached;
      row.step_reached = r.step_reached;
      row.best_smoothed = r.best_smoothed;
      row.status = r.status;
      opt_result.runs.push_back(row);
      if (r.reached) ++opt_result.n_reached;
    }
    result.per_optimizer.push_back(std::move(opt_result));
  }
  return result;
}

// --- two-layer instability demo ------------------------------------------------

struct DivergenceDemoConfig {
  const DatasetHandle* data = nullptr;
  std::size_t width = 32;
  std::size_t batch = 32;
  double mu = 0.9;
  double nu = 0.7;
  double epsilon = 1e-15;
  double lambda = 1e-3;
  std::int64_t max_steps = 50000;
  double spike_factor = 10.0;
  std::int64_t smooth_window = 50;
  std::int64_t spike_start = 250;
  double spike_min_floor = 0.01;
  std::size_t n_seeds = 5;
  std::uint64_t seed_base = 0;
};

struct DivergenceDemoResult {
  std::vector<SmoothedTrainResult> adam;
  std::vector<SmoothedTrainResult> laprop;

  std::size_t adam_spikes() const {
    std::size_t n = 0;
    for (const auto& r : adam) n += r.spiked;
    return n;
  }
  std::size_t laprop_spikes() const {
    std::size_t n = 0;
    for (const auto& r : laprop) n += r.spiked;
    return n;
  }
};

/// One hidden ReLU layer, same data, same seeds: count runs whose smoothed
/// training loss spikes above spike_factor times its running minimum.
inline DivergenceDemoResult divergence_demo(const DivergenceDemoConfig& config) {
  if (config.data == nullptr) throw std::invalid_argument("divergence demo: dataset required");
  MlpClassificationProblem problem;
  problem.data = config.data;
  problem.net =
      NetworkSpec{config.data->input_dim, config.width, 1, config.data->classes};
  problem.batch_size = config.batch;

  SmoothedTrainConfig tc;
  tc.hp.lambda = config.lambda;
  tc.hp.mu = config.mu;
  tc.hp.nu = config.nu;
  tc.hp.epsilon = config.epsilon;
  tc.max_steps = config.max_steps;
  tc.smooth_window = config.smooth_window;
  tc.spike_factor = config.spike_factor;
  tc.spike_start = config.spike_start;
  tc.spike_min_floor = config.spike_min_floor;
  tc.stop_on_reach = false;

  DivergenceDemoResult result;
  for (std::size_t s = 0; s < config.n_seeds; ++s) {
    tc.kind = OptimizerKind::Adam;
    result.adam.push_back(train_mlp_smoothed(problem, tc, config.seed_base + s));
    tc.kind = OptimizerKind::LaProp;
    result.laprop.push_back(train_mlp_smoothed(problem, tc, config.seed_base + s));
  }
  return result;
}

// --- online quadratic regret -----------------------------------------------------

struct RegretExperimentConfig {
  std::size_t dim = 4;
  std::int64_t horizon = 100000;
  double radius = 10.0;
  OptimizerKind kind = OptimizerKind::LaProp;
  double lambda = 0.1;
  double mu = 0.9;
  double zeta = 0.99;
  double nu = 0.999;
  double epsilon = 1e-15;
  std::size_t n_seeds = 5;
  std::uint64_t target_seed_base = 500;
};

struct RegretExperimentResult {
  std::vector<RegretReport> per_seed;

  /// R(T)/sqrt(T) at the checkpoint closest to T.
  static double rate_at(const RegretReport& rep, std::int64_t T) {
    for (std::size_t i = 0; i < rep.checkpoints.size(); ++i)
      if (rep.checkpoints[i] == T) return rep.regret_rate[i];
    throw std::invalid_argument("no checkpoint at T=" + std::to_string(T));
  }
};

/// The decaying-schedule setting: lambda_t = lambda/sqrt(t), mu_t = mu zeta^t.
inline RegretExperimentResult regret_experiment(const RegretExperimentConfig& config) {
  HyperParams hp;
  hp.lambda = config.lambda;
  hp.mu = config.mu;
  hp.nu = config.nu;
  hp.epsilon = config.epsilon;
  hp.lr_schedule = ScheduleSpec::inv_sqrt();
  hp.mu_schedule = ScheduleSpec::geometric(config.zeta);

  RegretExperimentResult result;
  for (std::size_t s = 0; s < config.n_seeds; ++s) {
    OnlineQuadratic problem(config.dim, config.horizon, config.radius,
                            config.target_seed_base + s);
    result.per_seed.push_back(regret_run(problem, config.kind, hp, s));
  }
  return result;
}

}  // namespace laprop
