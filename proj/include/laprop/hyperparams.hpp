#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "laprop/schedule.hpp"

namespace laprop {

/// Shared optimizer configuration. Defaults follow the recommended setting
/// lambda = 4e-4, mu = 0.9, nu = 0.999, epsilon = 1e-15.
struct HyperParams {
  double lambda = 4e-4;       // base learning rate, > 0
  double mu = 0.9;            // momentum decay, in [0, 1)
  double nu = 0.999;          // preconditioner decay, in [0, 1)
  double epsilon = 1e-15;     // denominator guard, >= 0
  ScheduleSpec lr_schedule{};
  ScheduleSpec mu_schedule{};
  double weight_decay = 0.0;  // decoupled decay, in [0, 1)
  bool bias_correct = true;

  void validate() const {
    if (!(lambda > 0.0))
      throw std::invalid_argument("lambda must be > 0, got " + std::to_string(lambda));
    if (!(mu >= 0.0 && mu < 1.0))
      throw std::invalid_argument("mu must be in [0, 1), got " + std::to_string(mu));
    if (!(nu >= 0.0 && nu < 1.0))
      throw std::invalid_argument("nu must be in [0, 1), got " + std::to_string(nu));
    if (!(epsilon >= 0.0))
      throw std::invalid_argument("epsilon must be >= 0, got " + std::to_string(epsilon));
    if (!(weight_decay >= 0.0 && weight_decay < 1.0))
      throw std::invalid_argument("weight_decay must be in [0, 1), got " +
                                  std::to_string(weight_decay));
    lr_schedule.validate();
    mu_schedule.validate();
  }

  double lr_at(std::int64_t t) const { return schedule_eval(lr_schedule, lambda, t); }
  double mu_at(std::int64_t t) const { return schedule_eval(mu_schedule, mu, t); }
};

}  // namespace laprop
