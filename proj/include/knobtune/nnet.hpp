#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "knobtune/binio.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

enum class OutputActivation : std::uint8_t { Sigmoid = 0, Identity = 1 };

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Fully-connected network with ReLU hidden layers and a sigmoid or identity
// output layer. weights[l] is (layer_sizes[l+1] x layer_sizes[l]) row-major,
// biases[l] has layer_sizes[l+1] entries. All 64-bit floats.
class Mlp {
 public:
  struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void scale(double s) {
      for (auto& w : weights)
        for (auto& x : w) x *= s;
      for (auto& b : biases)
        for (auto& x : b) x *= s;
    }
  };

  Mlp() = default;

  Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output_activation)
      : layer_sizes_(std::move(layer_sizes)), output_activation_(output_activation) {
    if (layer_sizes_.size() < 2) throw ShapeError("network needs at least two layers");
    for (auto s : layer_sizes_)
      if (s == 0) throw ShapeError("layer size must be positive");
    weights_.resize(num_layers());
    biases_.resize(num_layers());
    for (std::size_t l = 0; l < num_layers(); ++l) {
      weights_[l].assign(layer_sizes_[l + 1] * layer_sizes_[l], 0.0);
      biases_[l].assign(layer_sizes_[l + 1], 0.0);
    }
  }

  std::size_t num_layers() const { return layer_sizes_.size() - 1; }
  std::size_t input_size() const { return layer_sizes_.front(); }
  std::size_t output_size() const { return layer_sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  OutputActivation output_activation() const { return output_activation_; }

  std::vector<std::vector<double>>& weights() { return weights_; }
  std::vector<std::vector<double>>& biases() { return biases_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  const std::vector<std::vector<double>>& biases() const { return biases_; }

  bool same_shape(const Mlp& other) const {
    return layer_sizes_ == other.layer_sizes_ && output_activation_ == other.output_activation_;
  }

  // Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  // final_layer_scale shrinks the last layer so a sigmoid output starts near
  // mid-range instead of saturated.
  void init_uniform(Rng& rng, double final_layer_scale = 1.0) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes_[l]));
      if (l + 1 == num_layers()) bound *= final_layer_scale;
      for (auto& w : weights_[l]) w = uniform_in(rng, -bound, bound);
      for (auto& b : biases_[l]) b = uniform_in(rng, -bound, bound);
    }
  }

  std::vector<double> forward(std::span<const double> input) const {
    if (input.size() != input_size())
      throw ShapeError("input has length " + std::to_string(input.size()) + ", expected " +
                       std::to_string(input_size()));
    std::vector<double> act(input.begin(), input.end());
    for (std::size_t l = 0; l < num_layers(); ++l) act = layer_forward(l, act);
    return act;
  }

  Gradients zero_gradients() const {
    Gradients g;
    g.weights.resize(num_layers());
    g.biases.resize(num_layers());
    for (std::size_t l = 0; l < num_layers(); ++l) {
      g.weights[l].assign(weights_[l].size(), 0.0);
      g.biases[l].assign(biases_[l].size(), 0.0);
    }
    return g;
  }

  // Reverse-mode gradients of upstream . forward(input). Parameter gradients
  // accumulate into grads (callers average over a batch by accumulating and
  // scaling); the returned vector is the gradient w.r.t. the input.
  std::vector<double> backward(std::span<const double> input, std::span<const double> upstream,
                               Gradients& grads) const {
    if (upstream.size() != output_size())
      throw ShapeError("upstream gradient has length " + std::to_string(upstream.size()) +
                       ", expected " + std::to_string(output_size()));
    // Forward pass, keeping pre-activations per layer.
    std::vector<std::vector<double>> activations(num_layers() + 1);
    std::vector<std::vector<double>> pre(num_layers());
    activations[0].assign(input.begin(), input.end());
    if (activations[0].size() != input_size())
      throw ShapeError("input has length " + std::to_string(input.size()) + ", expected " +
                       std::to_string(input_size()));
    for (std::size_t l = 0; l < num_layers(); ++l) {
      pre[l] = affine(l, activations[l]);
      activations[l + 1] = activate(l, pre[l]);
    }

    // delta = dL/d(pre-activation of layer l output).
    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t l = num_layers(); l-- > 0;) {
      const std::size_t n_out = layer_sizes_[l + 1];
      const std::size_t n_in = layer_sizes_[l];
      for (std::size_t j = 0; j < n_out; ++j) delta[j] *= activation_derivative(l, pre[l][j], activations[l + 1][j]);
      auto& gw = grads.weights[l];
      auto& gb = grads.biases[l];
      for (std::size_t j = 0; j < n_out; ++j) {
        gb[j] += delta[j];
        const double dj = delta[j];
        const double* in = activations[l].data();
        double* gwr = gw.data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i) gwr[i] += dj * in[i];
      }
      std::vector<double> prev_delta(n_in, 0.0);
      for (std::size_t j = 0; j < n_out; ++j) {
        const double dj = delta[j];
        const double* wr = weights_[l].data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i) prev_delta[i] += dj * wr[i];
      }
      delta = std::move(prev_delta);
    }
    return delta;
  }

  void save(std::ostream& os) const {
    binio::write_u64(os, layer_sizes_.size());
    for (auto s : layer_sizes_) binio::write_u64(os, s);
    binio::write_u8(os, static_cast<std::uint8_t>(output_activation_));
    for (std::size_t l = 0; l < num_layers(); ++l) {
      binio::write_f64_vec(os, weights_[l]);
      binio::write_f64_vec(os, biases_[l]);
    }
  }

  static Mlp load(std::istream& is) {
    std::uint64_t n = binio::read_u64(is);
    if (n < 2 || n > 64) throw CheckpointError("bad layer count in network");
    std::vector<std::size_t> sizes(n);
    for (auto& s : sizes) {
      s = binio::read_u64(is);
      if (s == 0 || s > (1u << 20)) throw CheckpointError("bad layer size in network");
    }
    std::uint8_t act = binio::read_u8(is);
    if (act > 1) throw CheckpointError("bad activation tag in network");
    Mlp net(std::move(sizes), static_cast<OutputActivation>(act));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto w = binio::read_f64_vec(is);
      auto b = binio::read_f64_vec(is);
      if (w.size() != net.weights_[l].size() || b.size() != net.biases_[l].size())
        throw CheckpointError("network parameter shape mismatch");
      net.weights_[l] = std::move(w);
      net.biases_[l] = std::move(b);
    }
    return net;
  }

 private:
  std::vector<double> affine(std::size_t l, const std::vector<double>& in) const {
    const std::size_t n_out = layer_sizes_[l + 1];
    const std::size_t n_in = layer_sizes_[l];
    std::vector<double> out(biases_[l]);
    for (std::size_t j = 0; j < n_out; ++j) {
      const double* wr = weights_[l].data() + j * n_in;
      double sum = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) sum += wr[i] * in[i];
      out[j] += sum;
    }
    return out;
  }

  std::vector<double> activate(std::size_t l, const std::vector<double>& pre) const {
    std::vector<double> out(pre.size());
    if (l + 1 < num_layers()) {
      for (std::size_t j = 0; j < pre.size(); ++j) out[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    } else if (output_activation_ == OutputActivation::Sigmoid) {
      for (std::size_t j = 0; j < pre.size(); ++j) out[j] = sigmoid(pre[j]);
    } else {
      out = pre;
    }
    return out;
  }

  double activation_derivative(std::size_t l, double pre, double post) const {
    if (l + 1 < num_layers()) return pre > 0.0 ? 1.0 : 0.0;
    if (output_activation_ == OutputActivation::Sigmoid) return post * (1.0 - post);
    return 1.0;
  }

  std::vector<double> layer_forward(std::size_t l, const std::vector<double>& in) const {
    return activate(l, affine(l, in));
  }

  std::vector<std::size_t> layer_sizes_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
  OutputActivation output_activation_ = OutputActivation::Identity;
};

// Bias-corrected Adam accumulators mirroring one network's parameters.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;

  static AdamState for_net(const Mlp& net, double lr) {
    AdamState s;
    s.learning_rate = lr;
    auto zero = net.zero_gradients();
    s.m_weights = zero.weights;
    s.v_weights = zero.weights;
    s.m_biases = zero.biases;
    s.v_biases = zero.biases;
    return s;
  }

  void save(std::ostream& os) const {
    binio::write_f64(os, learning_rate);
    binio::write_f64(os, beta1);
    binio::write_f64(os, beta2);
    binio::write_f64(os, epsilon);
    binio::write_u64(os, step_count);
    binio::write_u64(os, m_weights.size());
    for (std::size_t l = 0; l < m_weights.size(); ++l) {
      binio::write_f64_vec(os, m_weights[l]);
      binio::write_f64_vec(os, v_weights[l]);
      binio::write_f64_vec(os, m_biases[l]);
      binio::write_f64_vec(os, v_biases[l]);
    }
  }

  static AdamState load(std::istream& is) {
    AdamState s;
    s.learning_rate = binio::read_f64(is);
    s.beta1 = binio::read_f64(is);
    s.beta2 = binio::read_f64(is);
    s.epsilon = binio::read_f64(is);
    s.step_count = binio::read_u64(is);
    std::uint64_t layers = binio::read_u64(is);
    if (layers > 64) throw CheckpointError("bad optimizer layer count");
    for (std::uint64_t l = 0; l < layers; ++l) {
      s.m_weights.push_back(binio::read_f64_vec(is));
      s.v_weights.push_back(binio::read_f64_vec(is));
      s.m_biases.push_back(binio::read_f64_vec(is));
      s.v_biases.push_back(binio::read_f64_vec(is));
    }
    return s;
  }
};

namespace detail {

inline void adam_update(std::vector<double>& params, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, const AdamState& s,
                        double bc1, double bc2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grad[i];
    if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in Adam step");
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    double m_hat = m[i] / bc1;
    double v_hat = v[i] / bc2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace detail

inline void adam_step(Mlp& net, const Mlp::Gradients& grads, AdamState& state) {
  if (grads.weights.size() != net.num_layers())
    throw ShapeError("gradient/network layer count mismatch");
  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    detail::adam_update(net.weights()[l], grads.weights[l], state.m_weights[l], state.v_weights[l],
                        state, bc1, bc2);
    detail::adam_update(net.biases()[l], grads.biases[l], state.m_biases[l], state.v_biases[l],
                        state, bc1, bc2);
  }
}

// target <- (1 - tau) * target + tau * online, elementwise.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (!target.same_shape(online)) throw ShapeError("soft_update architecture mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0,1]");
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    auto& tw = target.weights()[l];
    const auto& ow = online.weights()[l];
    for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = (1.0 - tau) * tw[i] + tau * ow[i];
    auto& tb = target.biases()[l];
    const auto& ob = online.biases()[l];
    for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = (1.0 - tau) * tb[i] + tau * ob[i];
  }
}

}  // namespace knobtune
