#ifndef GRIDRESTORE_NN_HPP_
#define GRIDRESTORE_NN_HPP_

// Fixed-topology multilayer perceptron (tanh hidden layers, linear head) with
// hand-written reverse-mode gradients, a categorical policy head and Adam.
// Parameters live in one flat vector: for each layer, the row-major weight
// matrix (out x in) followed by the bias vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrestore/errors.hpp"
#include "gridrestore/rng.hpp"

namespace gridrestore::nn {

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;

  bool operator==(const MlpSpec&) const = default;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
  std::size_t layer_out(std::size_t l) const {
    return l == hidden_dims.size() ? output_dim : hidden_dims[l];
  }
  std::size_t layer_offset(std::size_t l) const {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < l; ++k) offset += layer_out(k) * (layer_in(k) + 1);
    return offset;
  }
  std::size_t param_count() const { return layer_offset(num_layers()); }

  void validate() const {
    if (input_dim == 0 || output_dim == 0 ||
        std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t d) { return d == 0; })) {
      throw DimensionMismatch("MLP dimensions must all be >= 1");
    }
  }
};

using ParamVector = std::vector<double>;

// Per-layer activations recorded by forward(); activations[0] is the input.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
};

inline void check_params(const MlpSpec& spec, std::span<const double> params) {
  if (params.size() != spec.param_count()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(params.size()) +
                            " entries, spec needs " + std::to_string(spec.param_count()));
  }
}

inline std::vector<double> forward(const MlpSpec& spec, std::span<const double> params,
                                   std::span<const double> input,
                                   ForwardCache* cache = nullptr) {
  check_params(spec, params);
  if (input.size() != spec.input_dim) {
    throw DimensionMismatch("input has " + std::to_string(input.size()) + " entries, expected " +
                            std::to_string(spec.input_dim));
  }
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_in(l), out = spec.layer_out(l);
    const double* w = params.data() + spec.layer_offset(l);
    const double* b = w + out * in;
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = l + 1 < layers ? std::tanh(acc) : acc;
    }
    x = std::move(y);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

// Adds d(loss)/d(params) to grad given d(loss)/d(output).
inline void backward_accumulate(const MlpSpec& spec, std::span<const double> params,
                                const ForwardCache& cache, std::span<const double> output_grad,
                                std::span<double> grad) {
  check_params(spec, params);
  if (grad.size() != params.size()) throw DimensionMismatch("gradient buffer size mismatch");
  if (output_grad.size() != spec.output_dim) {
    throw DimensionMismatch("output gradient has " + std::to_string(output_grad.size()) +
                            " entries, expected " + std::to_string(spec.output_dim));
  }
  const std::size_t layers = spec.num_layers();
  if (cache.activations.size() != layers + 1) {
    throw DimensionMismatch("forward cache does not match the network depth");
  }
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = spec.layer_in(l), out = spec.layer_out(l);
    const std::size_t offset = spec.layer_offset(l);
    const double* w = params.data() + offset;
    double* gw = grad.data() + offset;
    double* gb = gw + out * in;
    const auto& x = cache.activations[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
      gb[o] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    // x is tanh output of the previous layer: d tanh = 1 - y^2
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    delta = std::move(prev);
  }
}

inline ParamVector backward(const MlpSpec& spec, std::span<const double> params,
                            const ForwardCache& cache, std::span<const double> output_grad) {
  ParamVector grad(params.size(), 0.0);
  backward_accumulate(spec, params, cache, output_grad, grad);
  return grad;
}

namespace detail {

// Fills an out x in block with a scaled (semi-)orthogonal matrix.
inline void orthogonal_fill(double* w, std::size_t out, std::size_t in, double gain, Rng& rng) {
  const std::size_t rows = std::max(out, in), cols = std::min(out, in);
  std::vector<double> q(rows * cols);  // column-major: column c at q[c*rows]
  for (auto& v : q) v = rng.normal();
  for (std::size_t c = 0; c < cols; ++c) {
    double* col = q.data() + c * rows;
    for (std::size_t p = 0; p < c; ++p) {
      const double* prev = q.data() + p * rows;
      const double dot = std::inner_product(col, col + rows, prev, 0.0);
      for (std::size_t r = 0; r < rows; ++r) col[r] -= dot * prev[r];
    }
    const double norm = std::sqrt(std::inner_product(col, col + rows, col, 0.0));
    for (std::size_t r = 0; r < rows; ++r) col[r] /= norm;
  }
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) {
      // out >= in: W = Q (rows = out); otherwise W = Q^T (rows = in)
      w[o * in + i] = gain * (out >= in ? q[i * rows + o] : q[o * rows + i]);
    }
  }
}

}  // namespace detail

// Orthogonal weights (gain sqrt(2) on hidden layers, output_gain on the head),
// zero biases.
inline ParamVector init_params(const MlpSpec& spec, Rng& rng, double output_gain,
                               double hidden_gain = std::sqrt(2.0)) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double gain = l + 1 == spec.num_layers() ? output_gain : hidden_gain;
    detail::orthogonal_fill(params.data() + spec.layer_offset(l), spec.layer_out(l),
                            spec.layer_in(l), gain, rng);
  }
  return params;
}

struct Categorical {
  std::vector<double> probs;
  std::vector<double> log_probs;
};

// Softmax with max-subtraction.
inline Categorical categorical_head(std::span<const double> logits) {
  Categorical c;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  const double log_sum = std::log(sum);
  c.log_probs.reserve(logits.size());
  c.probs.reserve(logits.size());
  for (double z : logits) {
    const double lp = z - top - log_sum;
    c.log_probs.push_back(lp);
    c.probs.push_back(std::exp(lp));
  }
  return c;
}

inline std::size_t sample(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u above the final partial sum; pick the last non-zero entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0) return i;
  }
  return probs.size() - 1;
}

inline std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

inline double entropy(const Categorical& c) {
  double h = 0.0;
  for (std::size_t i = 0; i < c.probs.size(); ++i) {
    if (c.probs[i] > 0) h -= c.probs[i] * c.log_probs[i];
  }
  return std::max(0.0, h);
}

inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(std::size_t n, double lr) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
  }
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam descent step on params.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionMismatch("adam_step: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

// Scales grad in place so its L2 norm is at most max_norm; returns the
// pre-clip norm. max_norm <= 0 disables clipping.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

inline nlohmann::json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim}, {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  return s;
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"m", s.m},         {"v", s.v},         {"step", s.step}, {"lr", s.lr},
          {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  s.step = j.at("step").get<std::uint64_t>();
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  return s;
}

}  // namespace gridrestore::nn

#endif  // GRIDRESTORE_NN_HPP_
