#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laprop/mlp.hpp"
#include "laprop/optimizers.hpp"
#include "laprop/rng.hpp"

// Runtime checks of the update-magnitude bounds, the nu -> 0 heavy-tail
// behaviour of momentum-before-normalization, and the limit identities
// between family members.

namespace laprop {

enum class GradDist { Normal, StudentT3, Adversarial };

inline const char* to_string(GradDist d) {
  switch (d) {
    case GradDist::Normal: return "normal";
    case GradDist::StudentT3: return "student-t3";
    case GradDist::Adversarial: return "adversarial";
  }
  return "?";
}

enum class CheckOutcome { Pass, Fail, NotApplicable };

inline const char* to_string(CheckOutcome o) {
  switch (o) {
    case CheckOutcome::Pass: return "pass";
    case CheckOutcome::Fail: return "fail";
    case CheckOutcome::NotApplicable: return "not-applicable";
  }
  return "?";
}

struct BoundCheckReport {
  OptimizerKind kind = OptimizerKind::LaProp;
  double mu = 0.0;
  double nu = 0.0;
  double epsilon = 0.0;
  GradDist dist = GradDist::Normal;
  double bound = 0.0;      // checked bound: 1/sqrt(1-nu), or the product form for adam
  double alt_bound = std::numeric_limits<double>::quiet_NaN();  // adam: bare 1/(1-gamma)
  double empirical_max = 0.0;
  std::size_t n_sequences = 0;
  std::int64_t n_steps = 0;
  CheckOutcome outcome = CheckOutcome::Fail;

  bool passed() const { return outcome == CheckOutcome::Pass; }
};

namespace detail {

// Sign-alternating gradients whose magnitude sweeps 10^-120 .. 10^+120 and
// wraps, exercising both sudden explosions and sudden collapses of scale.
inline double adversarial_grad(std::int64_t t, std::int64_t phase) {
  const std::int64_t e = (t + phase) % 241 - 120;
  const double magnitude = std::pow(10.0, static_cast<double>(e));
  return (t % 2 == 0 ? 1.0 : -1.0) * magnitude;
}

inline void fill_gradient(GradDist dist, std::int64_t t,
                          std::span<const std::int64_t> phases, Rng& rng,
                          std::span<double> grad) {
  switch (dist) {
    case GradDist::Normal:
      for (double& g : grad) g = rng.normal();
      return;
    case GradDist::StudentT3:
      for (double& g : grad) g = rng.student_t3();
      return;
    case GradDist::Adversarial:
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] = adversarial_grad(t, phases[i]);
      return;
  }
}

}  // namespace detail

/// Stream random gradient sequences through the given optimizer and compare
/// the worst observed normalized update against the closed-form bound.
/// For adam the product bound (1/sqrt(1-nu)) * 1/(1-gamma) with
/// gamma = mu/sqrt(nu) is checked and requires mu < sqrt(nu); outside that
/// range the report is marked not-applicable. For laprop the bound is
/// 1/sqrt(1-nu) for every mu, nu in [0,1).
inline BoundCheckReport check_update_bound(OptimizerKind kind, double mu, double nu,
                                           double epsilon, std::size_t n_sequences,
                                           std::int64_t n_steps, GradDist dist,
                                           std::uint64_t seed, std::size_t dim = 2) {
  if (kind != OptimizerKind::LaProp && kind != OptimizerKind::Adam)
    throw std::invalid_argument("check_update_bound supports laprop and adam");
  BoundCheckReport rep;
  rep.kind = kind;
  rep.mu = mu;
  rep.nu = nu;
  rep.epsilon = epsilon;
  rep.dist = dist;
  rep.n_sequences = n_sequences;
  rep.n_steps = n_steps;

  if (kind == OptimizerKind::LaProp) {
    rep.bound = 1.0 / std::sqrt(1.0 - nu);
  } else {
    const double gamma = mu / std::sqrt(nu);
    rep.alt_bound = 1.0 / (1.0 - gamma);
    rep.bound = 1.0 / std::sqrt(1.0 - nu) / (1.0 - gamma);
    if (!(mu < std::sqrt(nu))) {
      rep.outcome = CheckOutcome::NotApplicable;
      return rep;
    }
  }

  HyperParams hp;
  hp.lambda = 1.0;
  hp.mu = mu;
  hp.nu = nu;
  hp.epsilon = epsilon;
  hp.bias_correct = true;

  Rng rng(seed);
  std::vector<double> grad(dim);
  std::vector<std::int64_t> phases(dim);
  StepOutput out;
  double worst = 0.0;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    for (auto& p : phases) p = static_cast<std::int64_t>(rng.next_u64() % 241);
    OptimizerState state = init_state(dim, kind);
    for (std::int64_t t = 1; t <= n_steps; ++t) {
      detail::fill_gradient(dist, t, phases, rng, grad);
      if (kind == OptimizerKind::LaProp)
        laprop_step(state, grad, hp, out);
      else
        adam_step(state, grad, hp, out);
      worst = std::max(worst, out.update_inf_norm);
    }
  }
  rep.empirical_max = worst;
  rep.outcome = worst <= rep.bound * (1.0 + 1e-9) ? CheckOutcome::Pass : CheckOutcome::Fail;
  return rep;
}

struct HeavyTailReport {
  double mu = 0.0;
  std::vector<std::int64_t> sample_sizes;
  std::vector<double> adam_max;     // running max of |u_t| at each N
  std::vector<double> adam_p999;    // 99.9th percentile of |u_t| over first N
  std::vector<double> laprop_max;   // stays <= 1 at nu = 0
};

/// Feed one i.i.d. standard-normal gradient stream through adam and laprop at
/// nu = 0, eps = 0, and record how the normalized update magnitude scales
/// with the sample size. adam's u_t = (m_t/c_m)/|g_t| has unbounded variance
/// for mu > 0, so its running max keeps growing; laprop's is capped at 1.
inline HeavyTailReport heavy_tail_scan(double mu, std::vector<std::int64_t> sample_sizes,
                                       std::uint64_t seed) {
  if (!(mu >= 0.0 && mu < 1.0))
    throw std::invalid_argument("heavy_tail_scan: mu must be in [0, 1)");
  if (sample_sizes.empty() || !std::is_sorted(sample_sizes.begin(), sample_sizes.end()))
    throw std::invalid_argument("heavy_tail_scan: sample sizes must be ascending");

  HyperParams hp;
  hp.lambda = 1.0;
  hp.mu = mu;
  hp.nu = 0.0;
  hp.epsilon = 0.0;
  hp.bias_correct = true;

  HeavyTailReport rep;
  rep.mu = mu;
  rep.sample_sizes = sample_sizes;

  Rng rng(seed);
  OptimizerState adam = init_state(1, OptimizerKind::Adam);
  OptimizerState lap = init_state(1, OptimizerKind::LaProp);
  const std::int64_t max_n = sample_sizes.back();
  std::vector<double> adam_values;
  adam_values.reserve(static_cast<std::size_t>(max_n));
  std::vector<double> g(1);
  StepOutput out;
  double adam_running = 0.0, lap_running = 0.0;
  std::size_t next = 0;
  std::vector<double> scratch;
  for (std::int64_t t = 1; t <= max_n; ++t) {
    g[0] = rng.normal();
    adam_step(adam, g, hp, out);
    adam_running = std::max(adam_running, out.update_inf_norm);
    adam_values.push_back(out.update_inf_norm);
    laprop_step(lap, g, hp, out);
    lap_running = std::max(lap_running, out.update_inf_norm);
    if (next < sample_sizes.size() && t == sample_sizes[next]) {
      rep.adam_max.push_back(adam_running);
      rep.laprop_max.push_back(lap_running);
      scratch.assign(adam_values.begin(), adam_values.end());
      const auto rank = static_cast<std::size_t>(
          std::ceil(0.999 * static_cast<double>(scratch.size()))) - 1;
      std::nth_element(scratch.begin(), scratch.begin() + rank, scratch.end());
      rep.adam_p999.push_back(scratch[rank]);
      ++next;
    }
  }
  return rep;
}

/// The limit identities between family members.
enum class EquivalencePair {
  LaPropNu0VsSsgMomentum,   // laprop(nu=0, eps=0) == ssg-m, exactly
  LaPropMu0VsRmsProp,       // laprop(mu=0) == rmsprop
  AdamMu0VsRmsProp,         // adam(mu=0) == rmsprop
  LaPropMu0Nu0VsSsg,        // laprop(mu=0, nu=0, eps=0) == ssg, exactly
};

inline const char* to_string(EquivalencePair p) {
  switch (p) {
    case EquivalencePair::LaPropNu0VsSsgMomentum: return "laprop(nu=0,eps=0) vs ssg-m";
    case EquivalencePair::LaPropMu0VsRmsProp: return "laprop(mu=0) vs rmsprop";
    case EquivalencePair::AdamMu0VsRmsProp: return "adam(mu=0) vs rmsprop";
    case EquivalencePair::LaPropMu0Nu0VsSsg: return "laprop(mu=0,nu=0,eps=0) vs ssg";
  }
  return "?";
}

/// Run both sides of an identity on shared random gradient sequences and
/// return the largest elementwise relative deviation between their deltas.
inline double equivalence_check(EquivalencePair pair, std::size_t n_sequences,
                                std::uint64_t seed, std::int64_t n_steps = 100,
                                std::size_t dim = 3) {
  Rng rng(seed);
  double worst = 0.0;
  std::vector<double> grad(dim);
  StepOutput out_a, out_b;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    HyperParams a, b;
    a.lambda = b.lambda = 1.0;
    const double mu = rng.uniform(0.0, 0.999);
    const double nu = rng.uniform(0.0, 0.999);
    OptimizerKind kind_a = OptimizerKind::LaProp;
    OptimizerKind kind_b = OptimizerKind::RmsProp;
    switch (pair) {
      case EquivalencePair::LaPropNu0VsSsgMomentum:
        a.mu = b.mu = mu;
        a.nu = 0.0;
        a.epsilon = b.epsilon = 0.0;
        kind_b = OptimizerKind::SsgMomentum;
        break;
      case EquivalencePair::LaPropMu0VsRmsProp:
        a.mu = b.mu = 0.0;
        a.nu = b.nu = nu;
        a.epsilon = b.epsilon = s % 2 == 0 ? 1e-15 : 0.0;
        break;
      case EquivalencePair::AdamMu0VsRmsProp:
        a.mu = b.mu = 0.0;
        a.nu = b.nu = nu;
        a.epsilon = b.epsilon = s % 2 == 0 ? 1e-15 : 0.0;
        kind_a = OptimizerKind::Adam;
        break;
      case EquivalencePair::LaPropMu0Nu0VsSsg:
        a.mu = b.mu = 0.0;
        a.nu = 0.0;
        a.epsilon = b.epsilon = 0.0;
        kind_b = OptimizerKind::Ssg;
        break;
    }
    // The gradient scale wanders over several orders of magnitude so the
    // identities are exercised away from unit scale.
    const double scale = std::exp(rng.uniform(-4.0, 4.0));
    OptimizerState sa = init_state(dim, kind_a);
    OptimizerState sb = init_state(dim, kind_b);
    for (std::int64_t t = 1; t <= n_steps; ++t) {
      for (double& gv : grad) gv = scale * rng.normal();
      switch (kind_a) {
        case OptimizerKind::LaProp: laprop_step(sa, grad, a, out_a); break;
        case OptimizerKind::Adam: adam_step(sa, grad, a, out_a); break;
        default: throw std::logic_error("unexpected kind");
      }
      switch (kind_b) {
        case OptimizerKind::RmsProp: rmsprop_step(sb, grad, b, out_b); break;
        case OptimizerKind::SsgMomentum: ssgm_step(sb, grad, b, out_b); break;
        case OptimizerKind::Ssg: ssg_step(sb, grad, b, out_b); break;
        default: throw std::logic_error("unexpected kind");
      }
      for (std::size_t i = 0; i < dim; ++i) {
        const double da = out_a.delta[i];
        const double db = out_b.delta[i];
        const double ref = std::max({std::abs(da), std::abs(db), 1e-300});
        worst = std::max(worst, std::abs(da - db) / ref);
      }
    }
  }
  return worst;
}

/// Central finite differences of a deterministic loss probe.
inline std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& probe,
    std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = probe(x);
    x[i] = saved - h;
    const double down = probe(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// --- default batteries -------------------------------------------------------

inline std::vector<std::pair<double, double>> default_laprop_bound_pairs() {
  std::vector<std::pair<double, double>> pairs;
  for (double mu : {0.0, 0.5, 0.9, 0.99})
    for (double nu : {0.0, 0.5, 0.9, 0.96, 0.999}) pairs.emplace_back(mu, nu);
  return pairs;
}

inline std::vector<std::pair<double, double>> default_adam_bound_pairs() {
  // All satisfy mu < sqrt(nu), several close to the boundary.
  return {{0.9, 0.999}, {0.9, 0.9}, {0.5, 0.5}, {0.3, 0.1}, {0.9, 0.96},
          {0.8, 0.7},   {0.6, 0.4}, {0.99, 0.999}, {0.45, 0.25}, {0.29, 0.09}};
}

inline std::vector<BoundCheckReport> run_bound_battery(std::uint64_t seed,
                                                       std::size_t n_sequences = 15,
                                                       std::int64_t n_steps = 120) {
  std::vector<BoundCheckReport> reports;
  std::uint64_t salt = 0;
  for (auto [mu, nu] : default_laprop_bound_pairs())
    for (GradDist dist : {GradDist::Normal, GradDist::StudentT3, GradDist::Adversarial})
      reports.push_back(check_update_bound(OptimizerKind::LaProp, mu, nu, 0.0,
                                           n_sequences, n_steps, dist, seed + salt++));
  for (auto [mu, nu] : default_adam_bound_pairs())
    for (GradDist dist : {GradDist::Normal, GradDist::StudentT3, GradDist::Adversarial})
      reports.push_back(check_update_bound(OptimizerKind::Adam, mu, nu, 0.0,
                                           n_sequences, n_steps, dist, seed + salt++));
  // One deliberately out-of-range adam configuration: reported, never "pass".
  reports.push_back(check_update_bound(OptimizerKind::Adam, 0.9, 0.5, 0.0, n_sequences,
                                       n_steps, GradDist::Normal, seed + salt++));
  return reports;
}

struct HeavyTailBattery {
  double mu = 0.9;
  std::vector<std::int64_t> sizes;
  std::vector<HeavyTailReport> reports;  // one per seed
  std::size_t count_exceeds_10 = 0;      // seeds whose final max > 10
  std::size_t count_strict_growth = 0;   // seeds with max(N_last) > max(N_first)
  bool laprop_capped = true;             // every laprop max <= 1 + 1e-12

  std::size_t n_seeds() const { return reports.size(); }
  bool pass() const {
    return laprop_capped && 10 * count_exceeds_10 >= 9 * n_seeds() &&
           20 * count_strict_growth >= 19 * n_seeds();
  }
};

inline HeavyTailBattery run_heavy_tail_battery(
    std::uint64_t seed_base = 7000, std::size_t n_seeds = 20, double mu = 0.9,
    std::vector<std::int64_t> sizes = {1000, 10000, 100000, 1000000}) {
  HeavyTailBattery battery;
  battery.mu = mu;
  battery.sizes = sizes;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    auto rep = heavy_tail_scan(mu, sizes, seed_base + s);
    if (rep.adam_max.back() > 10.0) ++battery.count_exceeds_10;
    if (rep.adam_max.back() > rep.adam_max.front()) ++battery.count_strict_growth;
    for (double m : rep.laprop_max)
      if (m > 1.0 + 1e-12) battery.laprop_capped = false;
    battery.reports.push_back(std::move(rep));
  }
  return battery;
}

struct EquivalenceBattery {
  struct Entry {
    EquivalencePair pair;
    double deviation = 0.0;
    double tolerance = 0.0;
  };
  std::vector<Entry> entries;

  bool pass() const {
    for (const auto& e : entries)
      if (!(e.deviation <= e.tolerance)) return false;
    return true;
  }
};

inline EquivalenceBattery run_equivalence_battery(std::size_t n_sequences = 1000,
                                                  std::uint64_t seed = 8000) {
  EquivalenceBattery battery;
  battery.entries.push_back(
      {EquivalencePair::LaPropNu0VsSsgMomentum,
       equivalence_check(EquivalencePair::LaPropNu0VsSsgMomentum, n_sequences, seed), 0.0});
  battery.entries.push_back(
      {EquivalencePair::LaPropMu0Nu0VsSsg,
       equivalence_check(EquivalencePair::LaPropMu0Nu0VsSsg, n_sequences, seed + 1), 0.0});
  battery.entries.push_back(
      {EquivalencePair::LaPropMu0VsRmsProp,
       equivalence_check(EquivalencePair::LaPropMu0VsRmsProp, n_sequences, seed + 2), 1e-15});
  battery.entries.push_back(
      {EquivalencePair::AdamMu0VsRmsProp,
       equivalence_check(EquivalencePair::AdamMu0VsRmsProp, n_sequences, seed + 3), 1e-15});
  return battery;
}

struct GradcheckBattery {
  struct Entry {
    NetworkSpec spec;
    std::size_t param_count = 0;
    double worst_rel_error = 0.0;
  };
  std::vector<Entry> entries;
  double tolerance = 1e-4;
  double worst = 0.0;

  bool pass() const { return worst <= tolerance; }
};

/// Analytic backprop against central finite differences on random small nets.
/// Relative error uses an absolute floor of 1e-3 so coordinates whose true
/// gradient is below the finite-difference noise floor do not dominate.
inline GradcheckBattery run_gradcheck_battery(std::size_t n_nets = 20,
                                              std::uint64_t seed = 9000,
                                              std::size_t max_params = 200) {
  GradcheckBattery battery;
  Rng rng(seed);
  while (battery.entries.size() < n_nets) {
    NetworkSpec spec{2 + rng.next_u64() % 5, 2 + rng.next_u64() % 5,
                     1 + rng.next_u64() % 3, 2 + rng.next_u64() % 3};
    if (spec.param_count() > max_params) continue;
    const auto params = kaiming_uniform_init(spec, rng.next_u64());
    Batch batch;
    batch.rows = 4 + rng.next_u64() % 5;
    batch.input_dim = spec.input_dim;
    batch.inputs.resize(batch.rows * spec.input_dim);
    batch.labels.resize(batch.rows);
    for (double& v : batch.inputs) v = rng.normal();
    for (auto& y : batch.labels) y = static_cast<int>(rng.next_u64() % spec.output_dim);

    ForwardCache cache;
    forward(params, batch, &cache);
    const auto analytic = backward(params, batch, cache);
    auto probe = [&](std::span<const double> x) {
      NetworkParams q;
      q.spec = spec;
      q.flat.assign(x.begin(), x.end());
      return forward(q, batch);
    };
    const auto fd = finite_diff_grad(probe, params.flat, 1e-5);
    GradcheckBattery::Entry entry;
    entry.spec = spec;
    entry.param_count = spec.param_count();
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double rel = std::abs(fd[i] - analytic[i]) /
                         std::max({std::abs(fd[i]), std::abs(analytic[i]), 1e-3});
      entry.worst_rel_error = std::max(entry.worst_rel_error, rel);
    }
    battery.worst = std::max(battery.worst, entry.worst_rel_error);
    battery.entries.push_back(entry);
  }
  return battery;
}

}  // namespace laprop
