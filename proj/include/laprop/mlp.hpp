#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laprop/errors.hpp"
#include "laprop/rng.hpp"

// Fully-connected ReLU classifier with hand-written backprop. Parameters for
// all layers live in one flat vector so the optimizers can treat the network
// as a plain parameter vector. Layer l maps fan_in(l) -> fan_out(l); layers
// 0..depth-1 are ReLU hidden layers, layer `depth` produces the logits.

namespace laprop {

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_width = 0;
  std::size_t depth = 0;  // number of hidden layers
  std::size_t output_dim = 0;

  void validate() const {
    if (input_dim < 1 || hidden_width < 1 || depth < 1 || output_dim < 1)
      throw std::invalid_argument("network dimensions must all be >= 1");
  }

  std::size_t n_layers() const { return depth + 1; }
  std::size_t fan_in(std::size_t l) const { return l == 0 ? input_dim : hidden_width; }
  std::size_t fan_out(std::size_t l) const {
    return l == depth ? output_dim : hidden_width;
  }
  std::size_t layer_param_count(std::size_t l) const {
    return (fan_in(l) + 1) * fan_out(l);
  }
  std::size_t param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) total += layer_param_count(l);
    return total;
  }
};

/// Flat parameter storage with per-layer views. Layout per layer: the weight
/// matrix (fan_in x fan_out, row-major) followed by the bias vector.
struct NetworkParams {
  NetworkSpec spec;
  std::vector<double> flat;

  std::size_t layer_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < l; ++i) off += spec.layer_param_count(i);
    return off;
  }
  std::span<double> weights(std::size_t l) {
    return {flat.data() + layer_offset(l), spec.fan_in(l) * spec.fan_out(l)};
  }
  std::span<const double> weights(std::size_t l) const {
    return {flat.data() + layer_offset(l), spec.fan_in(l) * spec.fan_out(l)};
  }
  std::span<double> biases(std::size_t l) {
    return {flat.data() + layer_offset(l) + spec.fan_in(l) * spec.fan_out(l),
            spec.fan_out(l)};
  }
  std::span<const double> biases(std::size_t l) const {
    return {flat.data() + layer_offset(l) + spec.fan_in(l) * spec.fan_out(l),
            spec.fan_out(l)};
  }

  struct Layer {
    std::vector<double> weights;
    std::vector<double> biases;
  };

  std::vector<Layer> unflatten() const {
    std::vector<Layer> layers(spec.n_layers());
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
      auto w = weights(l);
      auto b = biases(l);
      layers[l].weights.assign(w.begin(), w.end());
      layers[l].biases.assign(b.begin(), b.end());
    }
    return layers;
  }

  static NetworkParams flatten(const NetworkSpec& spec, const std::vector<Layer>& layers) {
    spec.validate();
    if (layers.size() != spec.n_layers())
      throw std::invalid_argument("flatten: wrong layer count");
    NetworkParams p;
    p.spec = spec;
    p.flat.reserve(spec.param_count());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].weights.size() != spec.fan_in(l) * spec.fan_out(l) ||
          layers[l].biases.size() != spec.fan_out(l))
        throw std::invalid_argument("flatten: layer " + std::to_string(l) +
                                    " has wrong shape");
      p.flat.insert(p.flat.end(), layers[l].weights.begin(), layers[l].weights.end());
      p.flat.insert(p.flat.end(), layers[l].biases.begin(), layers[l].biases.end());
    }
    return p;
  }
};

/// Weights uniform on [-b, b] with b = sqrt(6 / fan_in); biases uniform on
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)]. Fully determined by the seed.
inline NetworkParams kaiming_uniform_init(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams p;
  p.spec = spec;
  p.flat.resize(spec.param_count());
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const double wb = std::sqrt(6.0 / static_cast<double>(spec.fan_in(l)));
    for (double& w : p.weights(l)) w = rng.uniform(-wb, wb);
    const double bb = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
    for (double& b : p.biases(l)) b = rng.uniform(-bb, bb);
  }
  return p;
}

struct Batch {
  std::size_t rows = 0;
  std::size_t input_dim = 0;
  std::vector<double> inputs;  // rows x input_dim, row-major
  std::vector<int> labels;

  void validate(const NetworkSpec& spec) const {
    if (rows == 0) throw std::invalid_argument("batch is empty");
    if (input_dim != spec.input_dim)
      throw std::invalid_argument("batch input_dim does not match network");
    if (inputs.size() != rows * input_dim || labels.size() != rows)
      throw std::invalid_argument("batch row counts do not match");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= spec.output_dim)
        throw std::invalid_argument("label out of range: " + std::to_string(y));
  }
};

/// Activations retained by forward for the matching backward call.
struct ForwardCache {
  std::size_t rows = 0;
  NetworkSpec spec;
  std::vector<std::vector<double>> hidden;  // outputs of hidden layers 1..depth
  std::vector<double> probs;                // rows x output_dim softmax
  double loss = 0.0;
};

namespace detail {

// C(rows x n) = A(rows x k) * W(k x n) + bias; row-major throughout. Four
// rows at a time so each W row is loaded once per block.
inline void affine(const double* a, std::size_t rows, std::size_t k, const double* w,
                   const double* bias, std::size_t n, double* c) {
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::size_t j = 0; j < n; ++j) c0[j] = c1[j] = c2[j] = c3[j] = bias[j];
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t p = 0; p < k; ++p) {
      const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const double* wp = w + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double wj = wp[j];
        c0[j] += v0 * wj;
        c1[j] += v1 * wj;
        c2[j] += v2 * wj;
        c3[j] += v3 * wj;
      }
    }
  }
  for (; i < rows; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = bias[j];
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* wp = w + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * wp[j];
    }
  }
}

}  // namespace detail

/// Mean softmax cross-entropy over the batch. When `cache` is given it is
/// filled for a subsequent backward call.
inline double forward(const NetworkParams& params, const Batch& batch,
                      ForwardCache* cache = nullptr) {
  const NetworkSpec& spec = params.spec;
  spec.validate();
  batch.validate(spec);

  std::vector<std::vector<double>> local_hidden;
  std::vector<std::vector<double>>& hidden = cache ? cache->hidden : local_hidden;
  hidden.resize(spec.depth);

  const double* act = batch.inputs.data();
  std::size_t act_width = spec.input_dim;
  std::vector<double> logits(batch.rows * spec.output_dim);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const bool is_output = l == spec.depth;
    const std::size_t n = spec.fan_out(l);
    std::vector<double>& dst = is_output ? logits : hidden[l];
    dst.resize(batch.rows * n);
    detail::affine(act, batch.rows, act_width, params.weights(l).data(),
                   params.biases(l).data(), n, dst.data());
    if (!is_output) {
      for (double& v : dst) v = v > 0.0 ? v : 0.0;
      act = dst.data();
      act_width = n;
    }
  }

  for (double v : logits)
    if (!std::isfinite(v)) throw NonFiniteError("non-finite activation in forward pass");

  const std::size_t out = spec.output_dim;
  std::vector<double> local_probs;
  std::vector<double>& probs = cache ? cache->probs : local_probs;
  probs.resize(batch.rows * out);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const double* z = logits.data() + i * out;
    double zmax = z[0];
    for (std::size_t j = 1; j < out; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < out; ++j) sum += std::exp(z[j] - zmax);
    const double lse = zmax + std::log(sum);
    for (std::size_t j = 0; j < out; ++j) probs[i * out + j] = std::exp(z[j] - lse);
    total += lse - z[batch.labels[i]];
  }
  const double loss = total / static_cast<double>(batch.rows);
  if (!std::isfinite(loss)) throw NonFiniteError("non-finite loss in forward pass");
  if (cache) {
    cache->rows = batch.rows;
    cache->spec = spec;
    cache->loss = loss;
  }
  return loss;
}

struct BackwardScratch {
  std::vector<double> dz;
  std::vector<double> da;
};

/// Gradient of the mean loss with respect to the flattened parameters.
inline void backward(const NetworkParams& params, const Batch& batch,
                     const ForwardCache& cache, std::span<double> grad_out,
                     BackwardScratch& scratch) {
  const NetworkSpec& spec = params.spec;
  if (cache.rows != batch.rows || cache.hidden.size() != spec.depth ||
      cache.probs.size() != batch.rows * spec.output_dim)
    throw std::invalid_argument("backward: cache does not match this network/batch");
  for (std::size_t l = 0; l < spec.depth; ++l)
    if (cache.hidden[l].size() != batch.rows * spec.fan_out(l))
      throw std::invalid_argument("backward: cache does not match this network/batch");
  if (grad_out.size() != params.flat.size())
    throw std::invalid_argument("backward: gradient buffer has wrong size");

  const std::size_t rows = batch.rows;
  const double inv_rows = 1.0 / static_cast<double>(rows);

  // dz starts as d(loss)/d(logits) = (probs - onehot) / rows.
  scratch.dz.assign(cache.probs.begin(), cache.probs.end());
  for (std::size_t i = 0; i < rows; ++i)
    scratch.dz[i * spec.output_dim + batch.labels[i]] -= 1.0;
  for (double& v : scratch.dz) v *= inv_rows;

  for (std::size_t l = spec.n_layers(); l-- > 0;) {
    const std::size_t k = spec.fan_in(l);
    const std::size_t n = spec.fan_out(l);
    const double* input = l == 0 ? batch.inputs.data() : cache.hidden[l - 1].data();

    double* dw = grad_out.data() + params.layer_offset(l);
    double* db = dw + k * n;
    for (std::size_t j = 0; j < k * n; ++j) dw[j] = 0.0;
    for (std::size_t j = 0; j < n; ++j) db[j] = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      const double* dz0 = scratch.dz.data() + i * n;
      const double* dz1 = dz0 + n;
      const double* dz2 = dz1 + n;
      const double* dz3 = dz2 + n;
      const double* in0 = input + i * k;
      const double* in1 = in0 + k;
      const double* in2 = in1 + k;
      const double* in3 = in2 + k;
      for (std::size_t p = 0; p < k; ++p) {
        const double v0 = in0[p], v1 = in1[p], v2 = in2[p], v3 = in3[p];
        double* dwp = dw + p * n;
        for (std::size_t j = 0; j < n; ++j)
          dwp[j] += v0 * dz0[j] + v1 * dz1[j] + v2 * dz2[j] + v3 * dz3[j];
      }
      for (std::size_t j = 0; j < n; ++j) db[j] += dz0[j] + dz1[j] + dz2[j] + dz3[j];
    }
    for (; i < rows; ++i) {
      const double* dzi = scratch.dz.data() + i * n;
      const double* ini = input + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ini[p];
        double* dwp = dw + p * n;
        for (std::size_t j = 0; j < n; ++j) dwp[j] += av * dzi[j];
      }
      for (std::size_t j = 0; j < n; ++j) db[j] += dzi[j];
    }

    if (l == 0) break;
    // da = dz * W^T, then gate by the ReLU mask of this layer's input.
    scratch.da.resize(rows * k);
    const double* w = params.weights(l).data();
    i = 0;
    for (; i + 4 <= rows; i += 4) {
      const double* dz0 = scratch.dz.data() + i * n;
      const double* dz1 = dz0 + n;
      const double* dz2 = dz1 + n;
      const double* dz3 = dz2 + n;
      double* da0 = scratch.da.data() + i * k;
      double* da1 = da0 + k;
      double* da2 = da1 + k;
      double* da3 = da2 + k;
      const double* in0 = input + i * k;
      const double* in1 = in0 + k;
      const double* in2 = in1 + k;
      const double* in3 = in2 + k;
      for (std::size_t p = 0; p < k; ++p) {
        const double* wp = w + p * n;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double wj = wp[j];
          s0 += dz0[j] * wj;
          s1 += dz1[j] * wj;
          s2 += dz2[j] * wj;
          s3 += dz3[j] * wj;
        }
        da0[p] = in0[p] > 0.0 ? s0 : 0.0;
        da1[p] = in1[p] > 0.0 ? s1 : 0.0;
        da2[p] = in2[p] > 0.0 ? s2 : 0.0;
        da3[p] = in3[p] > 0.0 ? s3 : 0.0;
      }
    }
    for (; i < rows; ++i) {
      const double* dzi = scratch.dz.data() + i * n;
      double* dai = scratch.da.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double* wp = w + p * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += dzi[j] * wp[j];
        dai[p] = input[i * k + p] > 0.0 ? s : 0.0;
      }
    }
    scratch.dz.swap(scratch.da);
  }
}

inline std::vector<double> backward(const NetworkParams& params, const Batch& batch,
                                    const ForwardCache& cache) {
  std::vector<double> grad(params.flat.size());
  BackwardScratch scratch;
  backward(params, batch, cache, grad, scratch);
  return grad;
}

}  // namespace laprop
