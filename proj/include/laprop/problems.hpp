#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "laprop/dataset.hpp"
#include "laprop/mlp.hpp"
#include "laprop/rng.hpp"

// Objectives the harness can step an optimizer against. A problem exposes
//   dim()                      parameter count
//   init(rng)                  initial parameter vector
//   sample(t, theta, rng, out) stochastic loss + gradient at theta
// and optionally optimum() and projection_radius().

namespace laprop {

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// (1 - x + e1)^2 + 100 (x - y + e2)^2 with e1, e2 ~ Uniform(-sigma, sigma),
/// drawn once per call and shared between the loss and the gradient.
inline double rosenbrock_loss_grad(double x, double y, double sigma, Rng& rng,
                                   std::array<double, 2>& grad) {
  const double e1 = sigma == 0.0 ? 0.0 : rng.uniform(-sigma, sigma);
  const double e2 = sigma == 0.0 ? 0.0 : rng.uniform(-sigma, sigma);
  const double a = 1.0 - x + e1;
  const double b = x - y + e2;
  grad[0] = -2.0 * a + 200.0 * b;
  grad[1] = -200.0 * b;
  return a * a + 100.0 * b * b;
}

struct NoisyRosenbrockProblem {
  double sigma = 0.0;

  std::size_t dim() const { return 2; }
  std::vector<double> init(Rng&) const { return {0.0, 0.0}; }
  void sample(std::int64_t, std::span<const double> theta, Rng& rng, LossGrad& out) const {
    out.grad.resize(2);
    std::array<double, 2> g;
    out.loss = rosenbrock_loss_grad(theta[0], theta[1], sigma, rng, g);
    out.grad[0] = g[0];
    out.grad[1] = g[1];
  }
  std::optional<std::vector<double>> optimum() const {
    return std::vector<double>{1.0, 1.0};
  }
};

/// Euclidean projection onto the ball of the given radius.
inline std::vector<double> project(std::span<const double> theta, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project: radius must be > 0");
  double norm_sq = 0.0;
  for (double v : theta) norm_sq += v * v;
  std::vector<double> out(theta.begin(), theta.end());
  const double norm = std::sqrt(norm_sq);
  if (norm > radius) {
    const double scale = radius / norm;
    for (double& v : out) v *= scale;
  }
  return out;
}

/// Online convex rounds l_t(theta) = 0.5 ||theta - a_t||^2 with targets a_t
/// i.i.d. Uniform(-1, 1)^dim, pregenerated from the target seed so the best
/// fixed point in hindsight has the closed form mean(a_1..a_T).
struct OnlineQuadratic {
  std::size_t dim_ = 0;
  std::int64_t horizon = 0;
  double domain_radius = 10.0;
  std::vector<double> targets;  // horizon x dim

  OnlineQuadratic(std::size_t dim, std::int64_t horizon_, double radius,
                  std::uint64_t target_seed)
      : dim_(dim), horizon(horizon_), domain_radius(radius) {
    if (horizon < 1) throw std::invalid_argument("OnlineQuadratic: horizon must be >= 1");
    if (!(domain_radius > 0.0))
      throw std::invalid_argument("OnlineQuadratic: domain_radius must be > 0");
    Rng rng(target_seed);
    targets.resize(static_cast<std::size_t>(horizon) * dim_);
    for (double& v : targets) v = rng.uniform(-1.0, 1.0);
  }

  std::span<const double> target(std::int64_t t) const {
    if (t < 1 || t > horizon)
      throw std::invalid_argument("OnlineQuadratic: round " + std::to_string(t) +
                                  " outside horizon " + std::to_string(horizon));
    return {targets.data() + static_cast<std::size_t>(t - 1) * dim_, dim_};
  }

  /// Loss and gradient of round t at theta.
  void round(std::int64_t t, std::span<const double> theta, LossGrad& out) const {
    const auto a = target(t);
    out.grad.resize(dim_);
    double loss = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = theta[i] - a[i];
      out.grad[i] = d;
      loss += 0.5 * d * d;
    }
    out.loss = loss;
  }

  double loss_at(std::int64_t t, std::span<const double> theta) const {
    const auto a = target(t);
    double loss = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = theta[i] - a[i];
      loss += 0.5 * d * d;
    }
    return loss;
  }

  /// Minimizer of the summed loss over the whole horizon.
  std::vector<double> theta_star() const {
    std::vector<double> mean(dim_, 0.0);
    for (std::int64_t t = 0; t < horizon; ++t)
      for (std::size_t i = 0; i < dim_; ++i)
        mean[i] += targets[static_cast<std::size_t>(t) * dim_ + i];
    for (double& v : mean) v /= static_cast<double>(horizon);
    return mean;
  }

  std::size_t dim() const { return dim_; }
  std::vector<double> init(Rng&) const { return std::vector<double>(dim_, 0.0); }
  void sample(std::int64_t t, std::span<const double> theta, Rng&, LossGrad& out) const {
    round(t, theta, out);
  }
  double projection_radius() const { return domain_radius; }
};

/// 1-D flat-bottomed well with quartic walls, loss = relu(|x| - wall)^4,
/// whose gradient-noise scale flips between two regimes at random times.
/// Inside the flat bottom the gradient is pure noise, so after a downshift a
/// fast-decaying preconditioner collapses to the new scale while the momentum
/// still carries old-regime magnitudes: optimizers that normalize the
/// accumulated momentum by the current preconditioner then take a runaway
/// cascade of steps, and the walls turn that into a loss-ceiling breach the
/// harness can flag. Optimizers that normalize each gradient by its own
/// contemporaneous preconditioner keep every step bounded here and just
/// random-walk inside the well.
struct HeavyTailStressProblem {
  double switch_prob = 0.02;
  double low_scale = 1e-3;
  double wall = 50.0;

  std::size_t dim() const { return 1; }
  std::vector<double> init(Rng&) {
    scale_ = 1.0;
    return {0.0};
  }
  void sample(std::int64_t, std::span<const double> theta, Rng& rng, LossGrad& out) {
    if (rng.uniform01() < switch_prob) scale_ = scale_ == 1.0 ? low_scale : 1.0;
    out.grad.resize(1);
    const double x = theta[0];
    const double r = std::max(std::abs(x) - wall, 0.0);
    const double r2 = r * r;
    out.loss = r2 * r2;
    const double s = (x > 0.0) - (x < 0.0);
    out.grad[0] = 4.0 * s * r2 * r + scale_ * rng.normal();
  }

 private:
  double scale_ = 1.0;
};

/// Minibatch training of the ReLU classifier: each sample() draws a batch
/// uniformly at random and runs forward + backward at the current weights.
struct MlpClassificationProblem {
  const DatasetHandle* data = nullptr;
  NetworkSpec net;
  std::size_t batch_size = 256;

  std::size_t dim() const { return net.param_count(); }

  std::vector<double> init(Rng& rng) const {
    return kaiming_uniform_init(net, rng.next_u64()).flat;
  }

  void sample(std::int64_t, std::span<const double> theta, Rng& rng, LossGrad& out) {
    params_.spec = net;
    params_.flat.assign(theta.begin(), theta.end());
    indices_.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      indices_[i] = static_cast<std::size_t>(rng.next_u64() % data->rows);
    batch_ = data->batch_of(indices_);
    forward(params_, batch_, &cache_);
    out.loss = cache_.loss;
    out.grad.resize(params_.flat.size());
    backward(params_, batch_, cache_, out.grad, scratch_);
  }

 private:
  NetworkParams params_;
  std::vector<std::size_t> indices_;
  Batch batch_;
  ForwardCache cache_;
  BackwardScratch scratch_;
};

}  // namespace laprop
