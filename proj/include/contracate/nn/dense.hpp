#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::nn {

enum class Activation { Identity, ReLU };

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "identity"; }

/// A trainable tensor and its gradient accumulator, as seen by optimizers.
struct Parameter {
  std::string name;
  Tensor2& value;
  Tensor2& grad;
};

/// Fully connected layer computing activation(input * W + b).
///
/// W is in_dim x out_dim and b is 1 x out_dim. forward() caches the input and
/// the pre-activations; backward() consumes them and accumulates parameter
/// gradients (call zero_grad() between steps).
class DenseLayer {
 public:
  DenseLayer() = default;

  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation)
      : weights_(Tensor2::Zero(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(out_dim))),
        bias_(Tensor2::Zero(1, static_cast<Eigen::Index>(out_dim))),
        grad_weights_(Tensor2::Zero(weights_.rows(), weights_.cols())),
        grad_bias_(Tensor2::Zero(1, bias_.cols())),
        activation_(activation) {
    if (in_dim == 0 || out_dim == 0) throw ConfigError("DenseLayer: dimensions must be positive");
  }

  /// Glorot-uniform weights, zero bias.
  static DenseLayer glorot(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng) {
    DenseLayer layer(in_dim, out_dim, activation);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (Eigen::Index i = 0; i < layer.weights_.size(); ++i) {
      layer.weights_.data()[i] = rng.uniform(-limit, limit);
    }
    return layer;
  }

  std::size_t in_dim() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights_.cols()); }
  Activation activation() const { return activation_; }

  Tensor2& weights() { return weights_; }
  const Tensor2& weights() const { return weights_; }
  Tensor2& bias() { return bias_; }
  const Tensor2& bias() const { return bias_; }
  const Tensor2& grad_weights() const { return grad_weights_; }
  const Tensor2& grad_bias() const { return grad_bias_; }

  /// Forward pass that records what backward() needs.
  const Tensor2& forward(const Tensor2& input) {
    check_input(input);
    input_ = input;
    pre_activation_ = affine(input);
    output_ = activate(pre_activation_);
    cached_ = true;
    return output_;
  }

  /// Forward pass without touching the cache.
  Tensor2 infer(const Tensor2& input) const {
    check_input(input);
    return activate(affine(input));
  }

  /// Accumulates dL/dW and dL/db from dL/d(output) and returns dL/d(input).
  Tensor2 backward(const Tensor2& upstream) {
    if (!cached_) throw StateError("DenseLayer::backward called without a preceding forward pass");
    if (upstream.rows() != output_.rows() || upstream.cols() != output_.cols()) {
      throw ConfigError("DenseLayer::backward: upstream gradient shape does not match the cached output");
    }
    Tensor2 delta = upstream;
    if (activation_ == Activation::ReLU) {
      // Subgradient at exactly zero is taken as 0.
      delta.array() *= (pre_activation_.array() > 0.0).cast<double>();
    }
    grad_weights_.noalias() += input_.transpose() * delta;
    grad_bias_ += delta.colwise().sum();
    return delta * weights_.transpose();
  }

  void zero_grad() {
    grad_weights_.setZero();
    grad_bias_.setZero();
  }

  void clear_cache() {
    cached_ = false;
    input_.resize(0, 0);
    pre_activation_.resize(0, 0);
    output_.resize(0, 0);
  }

  std::vector<Parameter> parameters(const std::string& prefix) {
    return {Parameter{prefix + ".weights", weights_, grad_weights_}, Parameter{prefix + ".bias", bias_, grad_bias_}};
  }

 private:
  void check_input(const Tensor2& input) const {
    if (input.cols() != weights_.rows()) {
      throw ConfigError("DenseLayer: input has " + std::to_string(input.cols()) + " columns, layer expects " +
                        std::to_string(weights_.rows()));
    }
  }

  Tensor2 affine(const Tensor2& input) const {
    Tensor2 z = input * weights_;
    z.rowwise() += bias_.row(0);
    return z;
  }

  Tensor2 activate(const Tensor2& z) const {
    if (activation_ == Activation::Identity) return z;
    return z.cwiseMax(0.0);
  }

  Tensor2 weights_;
  Tensor2 bias_;
  Tensor2 grad_weights_;
  Tensor2 grad_bias_;
  Activation activation_ = Activation::Identity;

  bool cached_ = false;
  Tensor2 input_;
  Tensor2 pre_activation_;
  Tensor2 output_;
};

/// Free-function spelling of DenseLayer::forward.
inline const Tensor2& dense_forward(DenseLayer& layer, const Tensor2& input) { return layer.forward(input); }

}  // namespace contracate::nn
