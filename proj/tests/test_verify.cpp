#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "laprop/verify.hpp"

using namespace laprop;

TEST_CASE("laprop bound checks pass with the exact closed form") {
  const auto rep = check_update_bound(OptimizerKind::LaProp, 0.9, 0.96, 0.0, 10, 120,
                                      GradDist::Normal, 1);
  CHECK(rep.bound == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(rep.empirical_max <= 5.0 * (1.0 + 1e-9));
  CHECK(rep.outcome == CheckOutcome::Pass);

  const auto rep0 = check_update_bound(OptimizerKind::LaProp, 0.9, 0.0, 0.0, 10, 120,
                                       GradDist::StudentT3, 2);
  CHECK(rep0.bound == 1.0);
  CHECK(rep0.empirical_max <= 1.0 + 1e-12);
  CHECK(rep0.outcome == CheckOutcome::Pass);
}

TEST_CASE("adam bound uses the product form and gates on mu < sqrt(nu)") {
  const auto rep = check_update_bound(OptimizerKind::Adam, 0.9, 0.999, 0.0, 10, 200,
                                      GradDist::Normal, 3);
  const double gamma = 0.9 / std::sqrt(0.999);
  CHECK(rep.bound == doctest::Approx(1.0 / std::sqrt(1.0 - 0.999) / (1.0 - gamma)));
  CHECK(rep.bound == doctest::Approx(317.66).epsilon(1e-3));
  CHECK(rep.alt_bound == doctest::Approx(1.0 / (1.0 - gamma)));
  CHECK(rep.outcome == CheckOutcome::Pass);

  const auto na = check_update_bound(OptimizerKind::Adam, 0.9, 0.5, 0.0, 5, 50,
                                     GradDist::Normal, 4);
  CHECK(na.outcome == CheckOutcome::NotApplicable);
  CHECK(!na.passed());

  CHECK_THROWS_AS(check_update_bound(OptimizerKind::Sgd, 0.9, 0.9, 0.0, 1, 10,
                                     GradDist::Normal, 5),
                  std::invalid_argument);
}

TEST_CASE("default bound battery passes everywhere it applies") {
  const auto reports = run_bound_battery(1234);
  std::size_t laprop_steps = 0;
  std::size_t not_applicable = 0;
  for (const auto& rep : reports) {
    if (rep.kind == OptimizerKind::LaProp)
      laprop_steps += rep.n_sequences * static_cast<std::size_t>(rep.n_steps);
    if (rep.outcome == CheckOutcome::NotApplicable) {
      ++not_applicable;
      continue;
    }
    CHECK(rep.outcome == CheckOutcome::Pass);
  }
  CHECK(laprop_steps >= 100000);
  CHECK(not_applicable == 1);
  CHECK(reports.size() == 20 * 3 + 10 * 3 + 1);
}

TEST_CASE("heavy-tail scan at mu = 0 is pinned to 1") {
  const auto rep = heavy_tail_scan(0.0, {1000, 5000}, 9);
  for (double m : rep.adam_max) CHECK(m == 1.0);
  for (double m : rep.laprop_max) CHECK(m == 1.0);
}

TEST_CASE("heavy-tail scan shows growing extremes for adam only") {
  const auto rep = heavy_tail_scan(0.9, {1000, 10000, 100000}, 11);
  REQUIRE(rep.adam_max.size() == 3);
  // nested prefixes: the running max cannot decrease
  CHECK(rep.adam_max[0] <= rep.adam_max[1]);
  CHECK(rep.adam_max[1] <= rep.adam_max[2]);
  // and grows strictly over two decades of samples
  CHECK(rep.adam_max[2] > rep.adam_max[0]);
  CHECK(rep.adam_max[2] > 10.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rep.laprop_max[i] <= 1.0 + 1e-12);
    CHECK(rep.adam_p999[i] <= rep.adam_max[i]);
  }
}

TEST_CASE("heavy-tail scan input validation") {
  CHECK_THROWS_AS(heavy_tail_scan(1.0, {100}, 1), std::invalid_argument);
  CHECK_THROWS_AS(heavy_tail_scan(0.5, {1000, 100}, 1), std::invalid_argument);
  CHECK_THROWS_AS(heavy_tail_scan(0.5, {}, 1), std::invalid_argument);
}

TEST_CASE("table of limit identities") {
  CHECK(equivalence_check(EquivalencePair::LaPropNu0VsSsgMomentum, 200, 21) == 0.0);
  CHECK(equivalence_check(EquivalencePair::LaPropMu0Nu0VsSsg, 200, 22) == 0.0);
  CHECK(equivalence_check(EquivalencePair::LaPropMu0VsRmsProp, 200, 23) <= 1e-15);
  CHECK(equivalence_check(EquivalencePair::AdamMu0VsRmsProp, 200, 24) <= 1e-15);
}

TEST_CASE("finite differences are exact for quadratics and O(h^2) on cubics") {
  auto quad = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
  const auto g = finite_diff_grad(quad, std::vector<double>{3.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(3.0).epsilon(1e-9));

  // Central differences of x^3 have error exactly h^2 at x = 1.
  auto cubic = [](std::span<const double> x) { return x[0] * x[0] * x[0]; };
  const double e1 =
      std::abs(finite_diff_grad(cubic, std::vector<double>{1.0}, 1e-3)[0] - 3.0);
  const double e2 =
      std::abs(finite_diff_grad(cubic, std::vector<double>{1.0}, 5e-4)[0] - 3.0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.01));

  CHECK_THROWS_AS(finite_diff_grad(quad, std::vector<double>{1.0}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("a momentum-first mutation of the decoupled rule breaks the bound") {
  // Applying momentum before normalization (the adam ordering) violates the
  // 1/sqrt(1-nu) cap at small nu, which is exactly what the bound battery is
  // supposed to catch if the update rule regresses.
  HyperParams hp;
  hp.lambda = 1.0;
  hp.mu = 0.9;
  hp.nu = 0.05;
  hp.epsilon = 0.0;
  const double cap = 1.0 / std::sqrt(1.0 - hp.nu);
  Rng rng(31);
  auto state = init_state(1, OptimizerKind::Adam);
  std::vector<double> g(1);
  StepOutput out;
  double worst = 0.0;
  for (int t = 0; t < 20000; ++t) {
    g[0] = rng.normal();
    adam_step(state, g, hp, out);
    worst = std::max(worst, out.update_inf_norm);
  }
  CHECK(worst > cap * (1.0 + 1e-9));
}
