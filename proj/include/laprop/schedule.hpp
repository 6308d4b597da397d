#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace laprop {

enum class ScheduleKind { Constant, InvSqrt, LinearWarmupDecay, Geometric };

/// Per-step scaling of a base quantity (learning rate or momentum decay).
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Constant;
  std::int64_t warmup_steps = 0;  // LinearWarmupDecay
  std::int64_t end_step = 1;      // LinearWarmupDecay
  double zeta = 0.99;             // Geometric: base * zeta^t

  static ScheduleSpec constant() { return {}; }

  static ScheduleSpec inv_sqrt() {
    ScheduleSpec s;
    s.kind = ScheduleKind::InvSqrt;
    return s;
  }

  static ScheduleSpec geometric(double zeta) {
    ScheduleSpec s;
    s.kind = ScheduleKind::Geometric;
    s.zeta = zeta;
    s.validate();
    return s;
  }

  static ScheduleSpec linear_warmup_decay(std::int64_t warmup_steps,
                                          std::int64_t end_step) {
    ScheduleSpec s;
    s.kind = ScheduleKind::LinearWarmupDecay;
    s.warmup_steps = warmup_steps;
    s.end_step = end_step;
    s.validate();
    return s;
  }

  void validate() const {
    if (kind == ScheduleKind::Geometric && !(zeta > 0.0 && zeta < 1.0)) {
      throw std::invalid_argument("geometric schedule requires 0 < zeta < 1, got " +
                                  std::to_string(zeta));
    }
    if (kind == ScheduleKind::LinearWarmupDecay) {
      if (warmup_steps < 0)
        throw std::invalid_argument("warmup_steps must be nonnegative");
      if (end_step < 1) throw std::invalid_argument("end_step must be positive");
      if (!(warmup_steps < end_step))
        throw std::invalid_argument("warmup_steps must be < end_step");
    }
  }
};

inline double schedule_eval(const ScheduleSpec& spec, double base,
                            std::int64_t t) {
  if (t < 1) throw std::invalid_argument("schedule_eval requires t >= 1");
  switch (spec.kind) {
    case ScheduleKind::Constant:
      return base;
    case ScheduleKind::InvSqrt:
      return base / std::sqrt(static_cast<double>(t));
    case ScheduleKind::Geometric:
      return base * std::pow(spec.zeta, static_cast<double>(t));
    case ScheduleKind::LinearWarmupDecay: {
      if (t <= spec.warmup_steps)
        return base * static_cast<double>(t) /
               static_cast<double>(spec.warmup_steps);
      if (t >= spec.end_step) return 0.0;
      return base * static_cast<double>(spec.end_step - t) /
             static_cast<double>(spec.end_step - spec.warmup_steps);
    }
  }
  throw std::logic_error("unreachable schedule kind");
}

}  // namespace laprop
