#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "laprop/mlp.hpp"
#include "laprop/rng.hpp"
#include "laprop/verify.hpp"

using namespace laprop;

namespace {

Batch random_batch(const NetworkSpec& spec, std::size_t rows, Rng& rng) {
  Batch b;
  b.rows = rows;
  b.input_dim = spec.input_dim;
  b.inputs.resize(rows * spec.input_dim);
  b.labels.resize(rows);
  for (double& v : b.inputs) v = rng.normal();
  for (auto& y : b.labels) y = static_cast<int>(rng.next_u64() % spec.output_dim);
  return b;
}

// Direct recomputation of the mean cross-entropy with plain softmax algebra;
// intentionally ignores the library's log-sum-exp path.
double naive_loss(const NetworkParams& params, const Batch& batch) {
  const auto& spec = params.spec;
  double total = 0.0;
  for (std::size_t r = 0; r < batch.rows; ++r) {
    std::vector<double> act(batch.inputs.begin() + r * spec.input_dim,
                            batch.inputs.begin() + (r + 1) * spec.input_dim);
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
      std::vector<double> next(spec.fan_out(l));
      auto w = params.weights(l);
      auto b = params.biases(l);
      for (std::size_t j = 0; j < spec.fan_out(l); ++j) {
        double z = b[j];
        for (std::size_t p = 0; p < spec.fan_in(l); ++p)
          z += act[p] * w[p * spec.fan_out(l) + j];
        next[j] = l < spec.depth ? std::max(z, 0.0) : z;
      }
      act = std::move(next);
    }
    double denom = 0.0;
    for (double z : act) denom += std::exp(z);
    total += -std::log(std::exp(act[batch.labels[r]]) / denom);
  }
  return total / static_cast<double>(batch.rows);
}

}  // namespace

TEST_CASE("zero parameters give the uniform-prediction loss") {
  NetworkSpec spec{4, 8, 2, 5};
  NetworkParams p;
  p.spec = spec;
  p.flat.assign(spec.param_count(), 0.0);
  Rng rng(1);
  const Batch batch = random_batch(spec, 16, rng);
  CHECK(forward(p, batch) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("two equal logits, label 0, loss ln 2") {
  NetworkSpec spec{1, 1, 1, 2};
  NetworkParams p;
  p.spec = spec;
  p.flat.assign(spec.param_count(), 0.0);
  Batch b;
  b.rows = 1;
  b.input_dim = 1;
  b.inputs = {0.7};
  b.labels = {0};
  CHECK(forward(p, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("kaiming uniform init is deterministic and respects its support") {
  NetworkSpec spec{784, 32, 1, 10};
  const auto a = kaiming_uniform_init(spec, 99);
  const auto b = kaiming_uniform_init(spec, 99);
  CHECK(a.flat == b.flat);
  const auto c = kaiming_uniform_init(spec, 100);
  CHECK(a.flat != c.flat);

  const double bound = std::sqrt(6.0 / 784.0);
  for (double w : a.weights(0)) {
    CHECK(w <= bound);
    CHECK(w >= -bound);
  }
}

TEST_CASE("kaiming weight variance matches b^2/3 over ~1e6 samples") {
  NetworkSpec spec{784, 1280, 1, 10};  // first layer alone has ~1e6 weights
  const auto p = kaiming_uniform_init(spec, 7);
  const auto w = p.weights(0);
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  const double bound = std::sqrt(6.0 / 784.0);
  const double expected = bound * bound / 3.0;
  CHECK(std::abs(var - expected) / expected < 0.02);
}

TEST_CASE("flatten and unflatten round-trip exactly") {
  NetworkSpec spec{3, 5, 3, 4};
  auto p = kaiming_uniform_init(spec, 3);
  const auto layers = p.unflatten();
  CHECK(layers.size() == spec.n_layers());
  const auto q = NetworkParams::flatten(spec, layers);
  CHECK(q.flat == p.flat);
}

TEST_CASE("forward agrees with a naive recomputation") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    NetworkSpec spec{1 + rng.next_u64() % 5, 1 + rng.next_u64() % 6,
                     1 + rng.next_u64() % 3, 2 + rng.next_u64() % 4};
    const auto p = kaiming_uniform_init(spec, 1000 + rep);
    const Batch batch = random_batch(spec, 7, rng);
    const double lib = forward(p, batch);
    const double ref = naive_loss(p, batch);
    CHECK(lib == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("forward is pure and backward is pure") {
  Rng rng(6);
  NetworkSpec spec{4, 6, 2, 3};
  const auto p = kaiming_uniform_init(spec, 8);
  const Batch batch = random_batch(spec, 9, rng);
  ForwardCache c1, c2;
  CHECK(forward(p, batch, &c1) == forward(p, batch, &c2));
  CHECK(backward(p, batch, c1) == backward(p, batch, c2));
}

TEST_CASE("zero-input batch kills input-layer weight gradients only") {
  NetworkSpec spec{4, 6, 1, 3};
  const auto p = kaiming_uniform_init(spec, 11);
  Batch b;
  b.rows = 5;
  b.input_dim = 4;
  b.inputs.assign(20, 0.0);
  b.labels = {0, 1, 2, 0, 1};
  ForwardCache cache;
  forward(p, b, &cache);
  const auto grad = backward(p, b, cache);
  NetworkParams g;
  g.spec = spec;
  g.flat = grad;
  for (double v : g.weights(0)) CHECK(v == 0.0);
  double bias_norm = 0.0;
  for (double v : g.biases(0)) bias_norm += std::abs(v);
  CHECK(bias_norm > 0.0);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  Rng rng(13);
  NetworkSpec spec{3, 5, 2, 3};
  const auto p = kaiming_uniform_init(spec, 21);
  const Batch batch = random_batch(spec, 6, rng);
  Batch doubled = batch;
  doubled.rows = 12;
  doubled.inputs.insert(doubled.inputs.end(), batch.inputs.begin(), batch.inputs.end());
  doubled.labels.insert(doubled.labels.end(), batch.labels.begin(), batch.labels.end());
  ForwardCache c1, c2;
  forward(p, batch, &c1);
  forward(p, doubled, &c2);
  const auto g1 = backward(p, batch, c1);
  const auto g2 = backward(p, doubled, c2);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(15);
  for (int rep = 0; rep < 5; ++rep) {
    NetworkSpec spec{2 + rng.next_u64() % 3, 2 + rng.next_u64() % 4, 1 + rng.next_u64() % 2,
                     2 + rng.next_u64() % 3};
    const auto p = kaiming_uniform_init(spec, 500 + rep);
    const Batch batch = random_batch(spec, 6, rng);
    ForwardCache cache;
    forward(p, batch, &cache);
    const auto analytic = backward(p, batch, cache);
    auto probe = [&](std::span<const double> x) {
      NetworkParams q;
      q.spec = spec;
      q.flat.assign(x.begin(), x.end());
      return forward(q, batch);
    };
    const auto fd = finite_diff_grad(probe, p.flat, 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double err = std::abs(fd[i] - analytic[i]) /
                         std::max({std::abs(fd[i]), std::abs(analytic[i]), 1e-3});
      CHECK(err <= 1e-4);
    }
  }
}

TEST_CASE("mismatched cache is rejected") {
  Rng rng(19);
  NetworkSpec spec{3, 4, 1, 3};
  const auto p = kaiming_uniform_init(spec, 33);
  const Batch batch = random_batch(spec, 4, rng);
  ForwardCache cache;
  forward(p, batch, &cache);
  const Batch other = random_batch(spec, 6, rng);
  CHECK_THROWS_AS(backward(p, other, cache), std::invalid_argument);
}

TEST_CASE("overflowing activations raise a non-finite error") {
  NetworkSpec spec{1, 2, 1, 2};
  auto p = kaiming_uniform_init(spec, 41);
  p.weights(0)[0] = 1e308;
  Batch b;
  b.rows = 1;
  b.input_dim = 1;
  b.inputs = {100.0};
  b.labels = {0};
  CHECK_THROWS_AS(forward(p, b), NonFiniteError);
}

TEST_CASE("shape validation") {
  NetworkSpec bad{0, 4, 1, 3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  NetworkSpec spec{3, 4, 1, 3};
  const auto p = kaiming_uniform_init(spec, 1);
  Batch b;
  b.rows = 2;
  b.input_dim = 2;  // wrong
  b.inputs.assign(4, 0.0);
  b.labels = {0, 1};
  CHECK_THROWS_AS(forward(p, b), std::invalid_argument);
  Batch bl;
  bl.rows = 1;
  bl.input_dim = 3;
  bl.inputs.assign(3, 0.0);
  bl.labels = {5};  // out of range
  CHECK_THROWS_AS(forward(p, bl), std::invalid_argument);
}
