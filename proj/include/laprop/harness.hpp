#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "laprop/optimizers.hpp"
#include "laprop/problems.hpp"

namespace laprop {

struct ConvergenceCriterion {
  double delta = 0.05;        // distance-to-optimum tolerance
  std::int64_t patience = 50; // consecutive recorded steps inside the tolerance
};

struct DivergenceCeiling {
  double loss_limit = 1e8;
  double param_limit = 1e8;  // on ||theta||_inf
};

enum class RunStatus { Converged, Diverged, Exhausted };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Exhausted: return "exhausted";
  }
  return "?";
}

struct RunConfig {
  OptimizerKind kind = OptimizerKind::LaProp;
  HyperParams hp{};
  std::int64_t max_steps = 1000;
  ConvergenceCriterion convergence{};
  DivergenceCeiling ceiling{};
  std::int64_t record_stride = 1;
  bool store_rows = true;

  void validate() const {
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (!(convergence.delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (convergence.patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
    hp.validate();
  }
};

struct TrajectoryRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double update_inf_norm = 0.0;
  double dist_to_opt = std::numeric_limits<double>::quiet_NaN();
  double regret = std::numeric_limits<double>::quiet_NaN();
};

struct TrajectoryRecord {
  RunStatus status = RunStatus::Exhausted;
  std::int64_t terminal_step = 0;
  std::int64_t steps_run = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_dist = std::numeric_limits<double>::quiet_NaN();
  double max_update_inf_norm = 0.0;
  std::vector<TrajectoryRow> rows;
};

/// Step the configured optimizer against a problem until convergence, a
/// divergence-ceiling breach / failed step, or step exhaustion. The loss of a
/// row is the stochastic loss sampled at the pre-step point; the distance is
/// measured after the step. The normalized update magnitude of a laprop run
/// with bias correction may never exceed 1/sqrt(1-nu): breaching it means the
/// implementation is broken, so it throws rather than being reported as data.
template <class Problem>
TrajectoryRecord run(Problem& problem, const RunConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<double> theta = problem.init(rng);
  Optimizer opt(config.kind, config.hp, theta.size());

  std::vector<double> optimum;
  if constexpr (requires { problem.optimum(); }) {
    if (auto o = problem.optimum()) optimum = *o;
  }

  const double laprop_bound =
      1.0 / std::sqrt(1.0 - config.hp.nu) * (1.0 + 1e-9);
  const bool enforce_bound =
      config.kind == OptimizerKind::LaProp && config.hp.bias_correct;

  TrajectoryRecord rec;
  LossGrad lg;
  StepOutput out;
  std::int64_t consecutive_close = 0;

  for (std::int64_t t = 1; t <= config.max_steps; ++t) {
    rec.steps_run = t;
    bool diverged = false;
    try {
      problem.sample(t, theta, rng, lg);
    } catch (const NonFiniteError&) {
      diverged = true;
      lg.loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!diverged && (!std::isfinite(lg.loss) || lg.loss > config.ceiling.loss_limit))
      diverged = true;

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
      if constexpr (requires { problem.projection_radius(); }) {
        theta = project(theta, problem.projection_radius());
      }
      if (!std::isfinite(max_abs) || max_abs > config.ceiling.param_limit)
        diverged = true;
      if (enforce_bound && out.update_inf_norm > laprop_bound)
        throw std::logic_error("laprop update bound breached: implementation bug");
      rec.max_update_inf_norm = std::max(rec.max_update_inf_norm, out.update_inf_norm);
    }

    double dist = std::numeric_limits<double>::quiet_NaN();
    if (!optimum.empty()) {
      double s = 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double d = theta[i] - optimum[i];
        s += d * d;
      }
      dist = std::sqrt(s);
    }

    const bool recorded = diverged || t % config.record_stride == 0 || t == config.max_steps;
    if (recorded && config.store_rows)
      rec.rows.push_back({t, lg.loss, diverged ? 0.0 : out.update_inf_norm, dist,
                          std::numeric_limits<double>::quiet_NaN()});
    rec.final_loss = lg.loss;
    rec.final_dist = dist;

    if (diverged) {
      rec.status = RunStatus::Diverged;
      rec.terminal_step = t;
      return rec;
    }

    if (recorded && !optimum.empty()) {
      consecutive_close = dist < config.convergence.delta ? consecutive_close + 1 : 0;
      if (consecutive_close >= config.convergence.patience) {
        rec.status = RunStatus::Converged;
        rec.terminal_step = t;
        return rec;
      }
    }
  }

  rec.status = RunStatus::Exhausted;
  rec.terminal_step = config.max_steps;
  return rec;
}

struct ConvergenceSummary {
  double median_steps = std::numeric_limits<double>::quiet_NaN();
  double failure_fraction = 0.0;
  std::size_t n_converged = 0;
  std::size_t n_total = 0;
};

/// Median steps-to-converge over the converged records; everything else
/// counts toward the failure fraction.
inline ConvergenceSummary convergence_time(std::span<const TrajectoryRecord> records) {
  if (records.empty())
    throw std::invalid_argument("convergence_time: need at least one record");
  ConvergenceSummary s;
  s.n_total = records.size();
  std::vector<double> steps;
  for (const auto& r : records)
    if (r.status == RunStatus::Converged) steps.push_back(static_cast<double>(r.terminal_step));
  s.n_converged = steps.size();
  s.failure_fraction =
      static_cast<double>(s.n_total - s.n_converged) / static_cast<double>(s.n_total);
  if (!steps.empty()) {
    std::sort(steps.begin(), steps.end());
    const std::size_t mid = steps.size() / 2;
    s.median_steps = steps.size() % 2 == 1 ? steps[mid] : 0.5 * (steps[mid - 1] + steps[mid]);
  }
  return s;
}

struct RegretReport {
  std::vector<std::int64_t> checkpoints;
  std::vector<double> regret_at;        // R(T) at each checkpoint
  std::vector<double> regret_rate;      // R(T)/sqrt(T)
  double diameter_hat = 0.0;            // from running per-coordinate min/max
  double grad_inf_max = 0.0;
  std::vector<double> learner_losses;   // l_t(theta_t), per round
  std::vector<double> star_losses;      // l_t(theta*), per round
  std::vector<double> cumulative;       // running regret sum, per round
};

inline std::vector<std::int64_t> log_checkpoints(std::int64_t horizon) {
  std::vector<std::int64_t> cps;
  for (double x = 2.0;; x += 0.25) {
    const auto t = static_cast<std::int64_t>(std::llround(std::pow(10.0, x)));
    if (t >= horizon) break;
    if (cps.empty() || t > cps.back()) cps.push_back(t);
  }
  cps.push_back(horizon);
  return cps;
}

/// Play the online quadratic for its whole horizon and report regret against
/// the hindsight-optimal fixed point. Iterates are projected back onto the
/// problem's ball after every step.
inline RegretReport regret_run(const OnlineQuadratic& problem, OptimizerKind kind,
                               const HyperParams& hp, std::uint64_t seed) {
  if (problem.horizon < 100)
    throw std::invalid_argument("regret_run: horizon must be >= 100");
  hp.validate();
  Rng rng(seed);
  std::vector<double> theta = problem.init(rng);
  Optimizer opt(kind, hp, theta.size());
  const std::vector<double> star = problem.theta_star();

  RegretReport rep;
  rep.checkpoints = log_checkpoints(problem.horizon);
  rep.learner_losses.reserve(problem.horizon);
  rep.star_losses.reserve(problem.horizon);
  rep.cumulative.reserve(problem.horizon);

  std::vector<double> lo(theta), hi(theta);
  LossGrad lg;
  StepOutput out;
  double regret = 0.0;
  std::size_t next_cp = 0;
  for (std::int64_t t = 1; t <= problem.horizon; ++t) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      lo[i] = std::min(lo[i], theta[i]);
      hi[i] = std::max(hi[i], theta[i]);
    }
    problem.round(t, theta, lg);
    const double star_loss = problem.loss_at(t, star);
    regret += lg.loss - star_loss;
    rep.learner_losses.push_back(lg.loss);
    rep.star_losses.push_back(star_loss);
    rep.cumulative.push_back(regret);
    for (double g : lg.grad) rep.grad_inf_max = std::max(rep.grad_inf_max, std::abs(g));

    opt.step(lg.grad, out);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += out.delta[i];
    theta = project(theta, problem.domain_radius);

    if (next_cp < rep.checkpoints.size() && t == rep.checkpoints[next_cp]) {
      rep.regret_at.push_back(regret);
      rep.regret_rate.push_back(regret / std::sqrt(static_cast<double>(t)));
      ++next_cp;
    }
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double d = hi[i] - lo[i];
    d2 += d * d;
  }
  rep.diameter_hat = std::sqrt(d2);
  return rep;
}

struct GridCell {
  double mu = 0.0;
  double nu = 0.0;
  double lambda = 0.0;
  ConvergenceSummary summary;
  double mean_final_loss = std::numeric_limits<double>::quiet_NaN();
  double divergence_fraction = 0.0;
  bool marked_divergent = false;  // the "cannot compute a number" marker
};

/// Cartesian sweep over (mu, nu, lambda). Cells can evaluate in parallel;
/// results land in slots keyed by cell index, so the table is identical
/// regardless of thread count or completion order.
template <class Problem>
std::vector<GridCell> grid_search(const Problem& problem, const RunConfig& base,
                                  std::span<const double> mus, std::span<const double> nus,
                                  std::span<const double> lambdas,
                                  std::span<const std::uint64_t> seeds,
                                  unsigned threads = 1) {
  if (mus.empty() || nus.empty() || lambdas.empty() || seeds.empty())
    throw std::invalid_argument("grid_search: all lists must be nonempty");
  const std::size_t n_cells = mus.size() * nus.size() * lambdas.size();
  std::vector<GridCell> cells(n_cells);

  auto eval_cell = [&](Problem& local_problem, std::size_t idx) {
    const std::size_t li = idx % lambdas.size();
    const std::size_t ni = (idx / lambdas.size()) % nus.size();
    const std::size_t mi = idx / (lambdas.size() * nus.size());
    GridCell cell;
    cell.mu = mus[mi];
    cell.nu = nus[ni];
    cell.lambda = lambdas[li];
    RunConfig cfg = base;
    cfg.hp.mu = cell.mu;
    cfg.hp.nu = cell.nu;
    cfg.hp.lambda = cell.lambda;
    cfg.store_rows = false;
    std::vector<TrajectoryRecord> records;
    records.reserve(seeds.size());
    for (std::uint64_t seed : seeds) records.push_back(run(local_problem, cfg, seed));
    cell.summary = convergence_time(records);
    double loss_sum = 0.0;
    std::size_t loss_n = 0, diverged = 0;
    for (const auto& r : records) {
      if (r.status == RunStatus::Diverged) ++diverged;
      if (std::isfinite(r.final_loss)) {
        loss_sum += r.final_loss;
        ++loss_n;
      }
    }
    cell.divergence_fraction =
        static_cast<double>(diverged) / static_cast<double>(records.size());
    cell.marked_divergent = 2 * diverged >= records.size();
    if (loss_n > 0) cell.mean_final_loss = loss_sum / static_cast<double>(loss_n);
    cells[idx] = cell;
  };

  if (threads <= 1 || n_cells <= 1) {
    Problem local = problem;
    for (std::size_t idx = 0; idx < n_cells; ++idx) eval_cell(local, idx);
    return cells;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(n_cells));
  pool.reserve(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    pool.emplace_back([&]() {
      Problem local = problem;
      for (std::size_t idx = next.fetch_add(1); idx < n_cells; idx = next.fetch_add(1))
        eval_cell(local, idx);
    });
  }
  for (auto& th : pool) th.join();
  return cells;
}

}  // namespace laprop
