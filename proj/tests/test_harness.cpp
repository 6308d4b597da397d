#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "laprop/harness.hpp"

using namespace laprop;

namespace {

RunConfig laprop_config(double lambda, double mu, double nu, std::int64_t max_steps) {
  RunConfig cfg;
  cfg.kind = OptimizerKind::LaProp;
  cfg.hp.lambda = lambda;
  cfg.hp.mu = mu;
  cfg.hp.nu = nu;
  cfg.hp.epsilon = 1e-15;
  cfg.max_steps = max_steps;
  return cfg;
}

TrajectoryRecord fake_record(RunStatus status, std::int64_t step) {
  TrajectoryRecord r;
  r.status = status;
  r.terminal_step = step;
  return r;
}

}  // namespace

TEST_CASE("noiseless rosenbrock converges well before the step budget") {
  NoisyRosenbrockProblem problem{0.0};
  RunConfig cfg = laprop_config(0.01, 0.9, 0.99, 10000);
  const auto rec = run(problem, cfg, 1);
  CHECK(rec.status == RunStatus::Converged);
  CHECK(rec.terminal_step < 10000);
  CHECK(rec.final_dist < cfg.convergence.delta);
  CHECK(rec.max_update_inf_norm <= 1.0 / std::sqrt(1.0 - 0.99) * (1.0 + 1e-9));
}

TEST_CASE("an absurd learning rate trips the divergence ceiling") {
  OnlineQuadratic problem(2, 100, 1e12, 5);
  RunConfig cfg = laprop_config(1e6, 0.9, 0.99, 50);
  cfg.ceiling.loss_limit = 1e6;
  const auto rec = run(problem, cfg, 2);
  CHECK(rec.status == RunStatus::Diverged);
  CHECK(rec.terminal_step == 2);  // the overshoot is sampled on the next round
}

TEST_CASE("unreachable criterion exhausts with exactly max_steps rows") {
  NoisyRosenbrockProblem problem{0.0};
  RunConfig cfg = laprop_config(1e-9, 0.9, 0.99, 5);
  cfg.convergence.delta = 1e-12;
  const auto rec = run(problem, cfg, 3);
  CHECK(rec.status == RunStatus::Exhausted);
  CHECK(rec.steps_run == 5);
  CHECK(rec.rows.size() == 5);
  for (std::size_t i = 0; i < rec.rows.size(); ++i)
    CHECK(rec.rows[i].step == static_cast<std::int64_t>(i + 1));
}

TEST_CASE("record stride thins rows but keeps the terminal step") {
  NoisyRosenbrockProblem problem{0.0};
  RunConfig cfg = laprop_config(1e-9, 0.9, 0.99, 103);
  cfg.convergence.delta = 1e-12;
  cfg.record_stride = 10;
  const auto rec = run(problem, cfg, 3);
  CHECK(rec.rows.size() == 11);  // steps 10, 20, ..., 100, plus terminal 103
  CHECK(rec.rows.back().step == 103);
}

TEST_CASE("convergence_time summarizes converged runs only") {
  SUBCASE("all converge at the same step") {
    std::vector<TrajectoryRecord> recs(4, fake_record(RunStatus::Converged, 100));
    const auto s = convergence_time(recs);
    CHECK(s.median_steps == 100.0);
    CHECK(s.failure_fraction == 0.0);
  }
  SUBCASE("half diverge") {
    std::vector<TrajectoryRecord> recs{
        fake_record(RunStatus::Converged, 80), fake_record(RunStatus::Diverged, 10),
        fake_record(RunStatus::Converged, 120), fake_record(RunStatus::Diverged, 5)};
    const auto s = convergence_time(recs);
    CHECK(s.failure_fraction == 0.5);
    CHECK(s.median_steps == 100.0);
  }
  SUBCASE("median ignores non-converged records") {
    std::vector<TrajectoryRecord> recs{
        fake_record(RunStatus::Converged, 50), fake_record(RunStatus::Exhausted, 9999),
        fake_record(RunStatus::Converged, 70), fake_record(RunStatus::Converged, 60)};
    const auto s = convergence_time(recs);
    CHECK(s.median_steps == 60.0);
    CHECK(s.n_converged == 3);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(convergence_time(std::vector<TrajectoryRecord>{}), std::invalid_argument);
  }
}

TEST_CASE("regret run on a stationary target flattens out") {
  OnlineQuadratic problem(3, 2000, 10.0, 7);
  // Degenerate case: overwrite every round's target with the first one.
  for (std::int64_t t = 1; t < problem.horizon; ++t)
    for (std::size_t i = 0; i < 3; ++i)
      problem.targets[static_cast<std::size_t>(t) * 3 + i] = problem.targets[i];

  HyperParams hp;
  hp.lambda = 0.5;
  hp.mu = 0.9;
  hp.nu = 0.99;
  hp.lr_schedule = ScheduleSpec::inv_sqrt();
  hp.mu_schedule = ScheduleSpec::geometric(0.99);
  const auto rep = regret_run(problem, OptimizerKind::LaProp, hp, 11);

  CHECK(rep.cumulative.front() ==
        doctest::Approx(rep.learner_losses.front() - rep.star_losses.front()));
  CHECK(rep.regret_rate.back() < rep.regret_rate.front());
  CHECK(rep.checkpoints.back() == 2000);
  // theta converged onto the constant target
  CHECK(rep.learner_losses.back() < 1e-4);
}

TEST_CASE("regret report is reproducible from its own logged losses") {
  OnlineQuadratic problem(4, 1500, 10.0, 21);
  HyperParams hp;
  hp.lambda = 0.3;
  hp.lr_schedule = ScheduleSpec::inv_sqrt();
  hp.mu_schedule = ScheduleSpec::geometric(0.99);
  const auto rep = regret_run(problem, OptimizerKind::LaProp, hp, 1);
  double acc = 0.0;
  std::size_t cp = 0;
  for (std::size_t t = 0; t < rep.learner_losses.size(); ++t) {
    acc += rep.learner_losses[t] - rep.star_losses[t];
    CHECK(acc == rep.cumulative[t]);
    if (cp < rep.checkpoints.size() &&
        static_cast<std::int64_t>(t + 1) == rep.checkpoints[cp]) {
      CHECK(rep.regret_at[cp] == acc);
      ++cp;
    }
  }
  CHECK(cp == rep.checkpoints.size());
  CHECK(rep.diameter_hat <= 2.0 * 10.0 * std::sqrt(4.0) + 1e-12);
  CHECK(rep.grad_inf_max > 0.0);
}

TEST_CASE("regret run rejects a short horizon") {
  OnlineQuadratic problem(2, 99, 10.0, 3);
  CHECK_THROWS_AS(regret_run(problem, OptimizerKind::LaProp, HyperParams{}, 1),
                  std::invalid_argument);
}

TEST_CASE("a 1x1x1 grid reduces to a plain run") {
  NoisyRosenbrockProblem problem{0.02};
  RunConfig base = laprop_config(0.01, 0.9, 0.9, 3000);
  const std::vector<double> mus{0.9}, nus{0.9}, lambdas{0.01};
  const std::vector<std::uint64_t> seeds{4, 5, 6};
  const auto cells = grid_search(problem, base, mus, nus, lambdas, seeds);
  REQUIRE(cells.size() == 1);

  std::vector<TrajectoryRecord> recs;
  NoisyRosenbrockProblem p2{0.02};
  for (auto seed : seeds) {
    RunConfig cfg = base;
    cfg.store_rows = false;
    recs.push_back(run(p2, cfg, seed));
  }
  const auto direct = convergence_time(recs);
  CHECK(cells[0].summary.median_steps == direct.median_steps);
  CHECK(cells[0].summary.failure_fraction == direct.failure_fraction);
}

TEST_CASE("grid results are independent of thread count") {
  NoisyRosenbrockProblem problem{0.04};
  RunConfig base = laprop_config(0.01, 0.9, 0.9, 2000);
  const std::vector<double> mus{0.8, 0.9}, nus{0.6, 0.98}, lambdas{0.003, 0.01};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  const auto serial = grid_search(problem, base, mus, nus, lambdas, seeds, 1);
  const auto parallel = grid_search(problem, base, mus, nus, lambdas, seeds, 4);
  REQUIRE(serial.size() == parallel.size());
  auto same = [](double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
  };
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].mu == parallel[i].mu);
    CHECK(serial[i].nu == parallel[i].nu);
    CHECK(serial[i].lambda == parallel[i].lambda);
    CHECK(same(serial[i].summary.median_steps, parallel[i].summary.median_steps));
    CHECK(serial[i].summary.failure_fraction == parallel[i].summary.failure_fraction);
    CHECK(same(serial[i].mean_final_loss, parallel[i].mean_final_loss));
  }
}

TEST_CASE("momentum-before-normalization diverges on the stress problem") {
  HeavyTailStressProblem problem;
  RunConfig base;
  base.hp.epsilon = 1e-15;
  base.max_steps = 20000;
  const std::vector<double> mus{0.9}, nus{0.1}, lambdas{1.0};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  base.kind = OptimizerKind::Adam;
  const auto adam_cells = grid_search(problem, base, mus, nus, lambdas, seeds);
  CHECK(adam_cells[0].marked_divergent);

  base.kind = OptimizerKind::LaProp;
  const auto laprop_cells = grid_search(problem, base, mus, nus, lambdas, seeds);
  CHECK(laprop_cells[0].divergence_fraction == 0.0);
  CHECK(!laprop_cells[0].marked_divergent);
}

TEST_CASE("equal configs reproduce identical trajectories") {
  NoisyRosenbrockProblem problem{0.1};
  RunConfig cfg = laprop_config(0.003, 0.9, 0.6, 4000);
  const auto a = run(problem, cfg, 99);
  const auto b = run(problem, cfg, 99);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].loss == b.rows[i].loss);
    CHECK(a.rows[i].update_inf_norm == b.rows[i].update_inf_norm);
    CHECK(a.rows[i].dist_to_opt == b.rows[i].dist_to_opt);
  }
  CHECK(a.status == b.status);
  CHECK(a.terminal_step == b.terminal_step);
}
