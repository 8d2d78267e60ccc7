#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/dense.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are allocated on the first step
/// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {
    if (!(config_.lr > 0.0) || !(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
        !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.epsilon > 0.0)) {
      throw ConfigError("Adam: lr and epsilon must be positive and betas must lie in [0, 1)");
    }
  }

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<Tensor2>& first_moments() const { return m_; }
  const std::vector<Tensor2>& second_moments() const { return v_; }

  void step(std::span<const Parameter> params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Tensor2::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Tensor2::Zero(p.value.rows(), p.value.cols()));
      }
    }
    if (params.size() != m_.size()) throw ConfigError("Adam::step: parameter count changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (p.value.rows() != m_[i].rows() || p.value.cols() != m_[i].cols() || p.grad.rows() != p.value.rows() ||
          p.grad.cols() != p.value.cols()) {
        throw ConfigError("Adam::step: shape mismatch for parameter " + p.name);
      }
      if (!p.grad.allFinite()) {
        Eigen::Index bad = 0;
        for (; bad < p.grad.size() && std::isfinite(p.grad.data()[bad]); ++bad) {
        }
        throw TrainingError("Adam::step: non-finite gradient in " + p.name + " at flat index " +
                            std::to_string(bad) + " (step " + std::to_string(step_ + 1) + ")");
      }
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = params[i].grad;
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
      params[i].value.array() -=
          config_.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + config_.epsilon);
    }
  }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
};

}  // namespace contracate::nn
