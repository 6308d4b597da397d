#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "laprop/errors.hpp"
#include "laprop/hyperparams.hpp"
#include "laprop/state.hpp"

// Step rules for the full optimizer family. Each step function advances the
// step counter, refreshes the bias-correction weight sums, mutates the state
// accumulators in place and returns the parameter displacement. The important
// structural difference lives in where the preconditioner is applied:
//
//   adam family:    m <- mu m + (1-mu) g,        delta = -lr (m/c_m) / sqrt(n/c_n)
//   laprop family:  m <- mu m + (1-mu) g/sqrt(n/c_n),  delta = -lr m / c_m
//
// i.e. the laprop family normalizes each gradient by its own contemporaneous
// preconditioner before accumulating momentum.

namespace laprop {

namespace detail {

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

inline void check_gradient(const OptimizerState& state, std::span<const double> grad) {
  if (grad.size() != state.size())
    throw std::invalid_argument("gradient length " + std::to_string(grad.size()) +
                                " does not match state size " +
                                std::to_string(state.size()));
  for (double g : grad)
    if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient component");
}

struct StepContext {
  double lr;
  double mu_t;
  double cm;
  double cn;
};

inline StepContext begin_step(OptimizerState& state, std::span<const double> grad,
                              const HyperParams& hp) {
  check_gradient(state, grad);
  ++state.t;
  const double mu_t = hp.mu_at(state.t);
  auto [cm, cn] = bias_corrections(state, mu_t, hp.nu, hp.bias_correct);
  return {hp.lr_at(state.t), mu_t, cm, cn};
}

// Gradient normalized by the corrected preconditioner. When the denominator
// is exactly zero (eps = 0 with an all-zero or underflowed history) the
// algebraic limit is sgn(g) * sqrt(c_n / (1 - nu)); in particular 0 for g = 0.
inline double normalized_grad(double g, double n, double cn, double eps, double nu) {
  const double den = std::sqrt(n / cn) + eps;
  if (den == 0.0) return sgn(g) * std::sqrt(cn / (1.0 - nu));
  return g / den;
}

}  // namespace detail

// --- laprop family ---------------------------------------------------------

inline void laprop_step(OptimizerState& state, std::span<const double> grad,
                        const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    const double q = detail::normalized_grad(g, state.n[i], c.cn, hp.epsilon, hp.nu);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * q;
    const double u = state.m[i] / c.cm;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

/// laprop plus decoupled weight decay: the decayed point is
/// (theta - lr m / c_m) * (1 - w), and delta is measured against theta.
inline void lapropw_step(OptimizerState& state, std::span<const double> grad,
                         const HyperParams& hp, std::span<const double> params,
                         StepOutput& out) {
  if (params.size() != state.size())
    throw std::invalid_argument("lapropw_step: params length does not match state");
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_abs = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    const double q = detail::normalized_grad(g, state.n[i], c.cn, hp.epsilon, hp.nu);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * q;
    const double inner = params[i] - c.lr * (state.m[i] / c.cm);
    out.delta[i] = inner * (1.0 - hp.weight_decay) - params[i];
    max_abs = std::max(max_abs, std::abs(out.delta[i]));
  }
  out.update_inf_norm = max_abs == 0.0 ? 0.0 : max_abs / c.lr;
}

/// laprop with a monotone preconditioner: n_max tracks the running max of n.
inline void amsprop_step(OptimizerState& state, std::span<const double> grad,
                         const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    state.n_max[i] = std::max(state.n_max[i], state.n[i]);
    const double q = detail::normalized_grad(g, state.n_max[i], c.cn, hp.epsilon, hp.nu);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * q;
    const double u = state.m[i] / c.cm;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

/// laprop normalizing by the centered second moment n - n_bar^2. Requires
/// eps > 0: the centered estimate is exactly zero on a constant history.
inline void centered_laprop_step(OptimizerState& state, std::span<const double> grad,
                                 const HyperParams& hp, StepOutput& out) {
  if (!(hp.epsilon > 0.0))
    throw std::invalid_argument("centered-laprop requires epsilon > 0");
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    state.n_bar[i] = hp.nu * state.n_bar[i] + (1.0 - hp.nu) * g;
    // >= 0 in exact arithmetic; clamp shields the sqrt from rounding.
    const double centered = std::max(state.n[i] - state.n_bar[i] * state.n_bar[i], 0.0);
    const double q = g / (std::sqrt(centered / c.cn) + hp.epsilon);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * q;
    const double u = state.m[i] / c.cm;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

// --- adam family ------------------------------------------------------------

inline void adam_step(OptimizerState& state, std::span<const double> grad,
                      const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * g;
    const double den = std::sqrt(state.n[i] / c.cn) + hp.epsilon;
    const double u = den == 0.0 ? 0.0 : (state.m[i] / c.cm) / den;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

inline void amsgrad_step(OptimizerState& state, std::span<const double> grad,
                         const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    state.n_max[i] = std::max(state.n_max[i], state.n[i]);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * g;
    const double den = std::sqrt(state.n_max[i] / c.cn) + hp.epsilon;
    const double u = den == 0.0 ? 0.0 : (state.m[i] / c.cm) / den;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

/// Bias-corrected RMSProp. Kept as its own loop (not a laprop/adam call) so
/// the mu = 0 equivalences can be checked across genuinely independent paths.
inline void rmsprop_step(OptimizerState& state, std::span<const double> grad,
                         const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.n[i] = hp.nu * state.n[i] + (1.0 - hp.nu) * g * g;
    const double u = detail::normalized_grad(g, state.n[i], c.cn, hp.epsilon, hp.nu);
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

// --- non-adaptive family ------------------------------------------------------

inline void sgd_step(OptimizerState& state, std::span<const double> grad,
                     const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.delta[i] = -c.lr * grad[i];
    max_u = std::max(max_u, std::abs(grad[i]));
  }
  out.update_inf_norm = max_u;
}

/// Heavy-ball momentum: m <- mu m + g (no (1-mu) damping, no correction).
inline void sgdm_step(OptimizerState& state, std::span<const double> grad,
                      const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = c.mu_t * state.m[i] + grad[i];
    out.delta[i] = -c.lr * state.m[i];
    max_u = std::max(max_u, std::abs(state.m[i]));
  }
  out.update_inf_norm = max_u;
}

inline void ssg_step(OptimizerState& state, std::span<const double> grad,
                     const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double s = detail::sgn(grad[i]);
    out.delta[i] = -c.lr * s;
    max_u = std::max(max_u, std::abs(s));
  }
  out.update_inf_norm = max_u;
}

inline void ssgm_step(OptimizerState& state, std::span<const double> grad,
                      const HyperParams& hp, StepOutput& out) {
  const auto c = detail::begin_step(state, grad, hp);
  out.delta.resize(grad.size());
  double max_u = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double s = detail::sgn(grad[i]);
    state.m[i] = c.mu_t * state.m[i] + (1.0 - c.mu_t) * s;
    const double u = state.m[i] / c.cm;
    out.delta[i] = -c.lr * u;
    max_u = std::max(max_u, std::abs(u));
  }
  out.update_inf_norm = max_u;
}

// --- convenience wrappers -----------------------------------------------------

inline StepOutput laprop_step(OptimizerState& s, std::span<const double> g,
                              const HyperParams& hp) {
  StepOutput out;
  laprop_step(s, g, hp, out);
  return out;
}
inline StepOutput lapropw_step(OptimizerState& s, std::span<const double> g,
                               const HyperParams& hp, std::span<const double> params) {
  StepOutput out;
  lapropw_step(s, g, hp, params, out);
  return out;
}
inline StepOutput amsprop_step(OptimizerState& s, std::span<const double> g,
                               const HyperParams& hp) {
  StepOutput out;
  amsprop_step(s, g, hp, out);
  return out;
}
inline StepOutput centered_laprop_step(OptimizerState& s, std::span<const double> g,
                                       const HyperParams& hp) {
  StepOutput out;
  centered_laprop_step(s, g, hp, out);
  return out;
}
inline StepOutput adam_step(OptimizerState& s, std::span<const double> g,
                            const HyperParams& hp) {
  StepOutput out;
  adam_step(s, g, hp, out);
  return out;
}
inline StepOutput amsgrad_step(OptimizerState& s, std::span<const double> g,
                               const HyperParams& hp) {
  StepOutput out;
  amsgrad_step(s, g, hp, out);
  return out;
}
inline StepOutput rmsprop_step(OptimizerState& s, std::span<const double> g,
                               const HyperParams& hp) {
  StepOutput out;
  rmsprop_step(s, g, hp, out);
  return out;
}
inline StepOutput sgd_step(OptimizerState& s, std::span<const double> g,
                           const HyperParams& hp) {
  StepOutput out;
  sgd_step(s, g, hp, out);
  return out;
}
inline StepOutput sgdm_step(OptimizerState& s, std::span<const double> g,
                            const HyperParams& hp) {
  StepOutput out;
  sgdm_step(s, g, hp, out);
  return out;
}
inline StepOutput ssg_step(OptimizerState& s, std::span<const double> g,
                           const HyperParams& hp) {
  StepOutput out;
  ssg_step(s, g, hp, out);
  return out;
}
inline StepOutput ssgm_step(OptimizerState& s, std::span<const double> g,
                            const HyperParams& hp) {
  StepOutput out;
  ssgm_step(s, g, hp, out);
  return out;
}

// --- facade -------------------------------------------------------------------

/// Owns state for one parameter vector and dispatches on kind. Validates the
/// configuration once at construction.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, HyperParams hp, std::size_t param_count)
      : kind_(kind), hp_(std::move(hp)), state_(init_state(param_count, kind)) {
    hp_.validate();
    if (kind_ == OptimizerKind::CenteredLaProp && !(hp_.epsilon > 0.0))
      throw std::invalid_argument("centered-laprop requires epsilon > 0");
  }

  void step(std::span<const double> grad, StepOutput& out) {
    switch (kind_) {
      case OptimizerKind::Sgd: sgd_step(state_, grad, hp_, out); return;
      case OptimizerKind::SgdMomentum: sgdm_step(state_, grad, hp_, out); return;
      case OptimizerKind::Ssg: ssg_step(state_, grad, hp_, out); return;
      case OptimizerKind::SsgMomentum: ssgm_step(state_, grad, hp_, out); return;
      case OptimizerKind::RmsProp: rmsprop_step(state_, grad, hp_, out); return;
      case OptimizerKind::Adam: adam_step(state_, grad, hp_, out); return;
      case OptimizerKind::AmsGrad: amsgrad_step(state_, grad, hp_, out); return;
      case OptimizerKind::LaProp: laprop_step(state_, grad, hp_, out); return;
      case OptimizerKind::AmsProp: amsprop_step(state_, grad, hp_, out); return;
      case OptimizerKind::CenteredLaProp:
        centered_laprop_step(state_, grad, hp_, out);
        return;
      case OptimizerKind::LaPropW:
        throw std::invalid_argument("lapropw step needs the parameter vector");
    }
  }

  void step(std::span<const double> grad, std::span<const double> params,
            StepOutput& out) {
    if (kind_ == OptimizerKind::LaPropW) {
      lapropw_step(state_, grad, hp_, params, out);
      return;
    }
    step(grad, out);
  }

  StepOutput step(std::span<const double> grad) {
    StepOutput out;
    step(grad, out);
    return out;
  }

  OptimizerKind kind() const { return kind_; }
  const HyperParams& hyper() const { return hp_; }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerKind kind_;
  HyperParams hp_;
  OptimizerState state_;
};

}  // namespace laprop
