#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/dense.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::nn {

/// Layer widths plus per-layer activation for building a LayerStack.
struct StackSpec {
  std::size_t in_dim = 0;
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;
};

/// Sequential composition of dense layers.
class LayerStack {
 public:
  LayerStack() = default;
  explicit LayerStack(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

  static LayerStack glorot(const StackSpec& spec, Rng& rng) {
    if (spec.widths.size() != spec.activations.size() || spec.widths.empty()) {
      throw ConfigError("LayerStack: widths and activations must be non-empty and of equal length");
    }
    std::vector<DenseLayer> layers;
    std::size_t in = spec.in_dim;
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
      layers.push_back(DenseLayer::glorot(in, spec.widths[i], spec.activations[i], rng));
      in = spec.widths[i];
    }
    return LayerStack(std::move(layers));
  }

  std::size_t in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  const Tensor2& forward(const Tensor2& input) {
    if (layers_.empty()) throw StateError("LayerStack::forward on an empty stack");
    const Tensor2* current = &input;
    for (auto& layer : layers_) current = &layer.forward(*current);
    forwarded_ = true;
    return *current;
  }

  Tensor2 infer(const Tensor2& input) const {
    if (layers_.empty()) throw StateError("LayerStack::infer on an empty stack");
    Tensor2 current = input;
    for (const auto& layer : layers_) current = layer.infer(current);
    return current;
  }

  /// Back-propagates dL/d(output); returns dL/d(input).
  Tensor2 backward(const Tensor2& upstream) {
    if (!forwarded_) throw StateError("LayerStack::backward called without a preceding forward pass");
    Tensor2 grad = upstream;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) grad = it->backward(grad);
    return grad;
  }

  void zero_grad() {
    for (auto& layer : layers_) layer.zero_grad();
  }

  std::vector<Parameter> parameters(const std::string& prefix) {
    std::vector<Parameter> params;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (auto& p : layers_[i].parameters(prefix + "." + std::to_string(i))) params.push_back(p);
    }
    return params;
  }

 private:
  void validate() const {
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i].in_dim() != layers_[i - 1].out_dim()) {
        throw ConfigError("LayerStack: layer " + std::to_string(i) + " input width does not match previous output");
      }
    }
  }

  std::vector<DenseLayer> layers_;
  bool forwarded_ = false;
};

}  // namespace contracate::nn
