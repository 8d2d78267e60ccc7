#pragma once

#include <algorithm>
#include <cmath>

#include "contracate/nn/tensor.hpp"

namespace contracate::nn {

/// Central finite differences of a scalar function with respect to every
/// entry of `param`. `loss` is re-evaluated with `param` perturbed in place;
/// each entry is restored afterwards.
template <typename LossFn>
Tensor2 numerical_gradient(LossFn&& loss, Tensor2& param, double step = 1e-5) {
  Tensor2 grad(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + step;
    const double up = loss();
    param.data()[i] = saved - step;
    const double down = loss();
    param.data()[i] = saved;
    grad.data()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps entries that
/// are zero in both gradients from dominating through round-off.
inline double max_relative_error(const Tensor2& analytic, const Tensor2& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace contracate::nn
