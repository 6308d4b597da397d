#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace laprop {

enum class OptimizerKind {
  Sgd,
  SgdMomentum,
  Ssg,
  SsgMomentum,
  RmsProp,
  Adam,
  AmsGrad,
  LaProp,
  LaPropW,
  AmsProp,
  CenteredLaProp,
};

inline const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdMomentum: return "sgd-m";
    case OptimizerKind::Ssg: return "ssg";
    case OptimizerKind::SsgMomentum: return "ssg-m";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AmsGrad: return "amsgrad";
    case OptimizerKind::LaProp: return "laprop";
    case OptimizerKind::LaPropW: return "lapropw";
    case OptimizerKind::AmsProp: return "amsprop";
    case OptimizerKind::CenteredLaProp: return "centered-laprop";
  }
  return "?";
}

inline std::optional<OptimizerKind> optimizer_kind_from_string(std::string_view name) {
  using K = OptimizerKind;
  for (K k : {K::Sgd, K::SgdMomentum, K::Ssg, K::SsgMomentum, K::RmsProp, K::Adam,
              K::AmsGrad, K::LaProp, K::LaPropW, K::AmsProp, K::CenteredLaProp}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

inline bool kind_uses_max_slot(OptimizerKind kind) {
  return kind == OptimizerKind::AmsGrad || kind == OptimizerKind::AmsProp;
}

inline bool kind_uses_centered_slot(OptimizerKind kind) {
  return kind == OptimizerKind::CenteredLaProp;
}

/// Per-parameter accumulators plus the step counter. The first call to a step
/// function moves t from 0 to 1.
struct OptimizerState {
  std::int64_t t = 0;
  std::vector<double> m;      // momentum
  std::vector<double> n;      // second-moment preconditioner
  std::vector<double> n_max;  // running max of n (AmsGrad / AmsProp)
  std::vector<double> n_bar;  // first-moment tracker (Centered LaProp)
  double cm_acc = 0.0;        // running bias-correction weight sum for m
  double cn_acc = 0.0;        // running bias-correction weight sum for n

  std::size_t size() const { return m.size(); }
};

inline OptimizerState init_state(std::size_t param_count, OptimizerKind kind) {
  if (param_count == 0)
    throw std::invalid_argument("init_state: param_count must be >= 1");
  OptimizerState s;
  s.m.assign(param_count, 0.0);
  s.n.assign(param_count, 0.0);
  if (kind_uses_max_slot(kind)) s.n_max.assign(param_count, 0.0);
  if (kind_uses_centered_slot(kind)) s.n_bar.assign(param_count, 0.0);
  return s;
}

/// One optimizer step's result. `delta` is the signed displacement applied to
/// the parameters; `update_inf_norm` is max_i |delta_i| / lr_t, the
/// learning-rate-normalized update magnitude that the bound checks monitor.
struct StepOutput {
  std::vector<double> delta;
  double update_inf_norm = 0.0;
};

/// Advance the recursive bias-correction weight sums and return (c_m, c_n).
/// For constant schedules they equal 1 - mu^t and 1 - nu^t. With correction
/// disabled the accumulators still advance but (1, 1) is returned.
inline std::pair<double, double> bias_corrections(OptimizerState& state, double mu_t,
                                                  double nu, bool bias_correct = true) {
  state.cn_acc = nu * state.cn_acc + (1.0 - nu);
  state.cm_acc = mu_t * state.cm_acc + (1.0 - mu_t);
  if (!bias_correct) return {1.0, 1.0};
  return {state.cm_acc, state.cn_acc};
}

}  // namespace laprop
