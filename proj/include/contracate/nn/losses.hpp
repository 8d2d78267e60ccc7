#pragma once

#include <cmath>
#include <cstddef>

#include "contracate/error.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::nn {

struct LossResult {
  double value = 0.0;
  Tensor2 grad;  // dL/d(pred)
};

/// Mean Huber loss over all elements of pred - target.
inline LossResult huber_loss(const Tensor2& pred, const Tensor2& target, double delta = 1.0) {
  require_same_shape(pred, target, "huber_loss");
  if (!(delta > 0.0)) throw ConfigError("huber_loss: delta must be positive");
  const auto count = static_cast<double>(pred.size());
  LossResult out{0.0, Tensor2(pred.rows(), pred.cols())};
  if (pred.size() == 0) return out;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = pred.data()[i] - target.data()[i];
    const double a = std::abs(r);
    if (a <= delta) {
      out.value += 0.5 * r * r;
      out.grad.data()[i] = r / count;
    } else {
      out.value += delta * (a - 0.5 * delta);
      out.grad.data()[i] = (r > 0.0 ? delta : -delta) / count;
    }
  }
  out.value /= count;
  return out;
}

struct TripletLossResult {
  double value = 0.0;
  std::size_t active = 0;  // triplets with a positive hinge
  Tensor2 grad_anchor;
  Tensor2 grad_positive;
  Tensor2 grad_negative;
};

/// Mean over rows of max(0, |a - p|^2 - |a - n|^2 + margin).
inline TripletLossResult triplet_loss(const Tensor2& anchor, const Tensor2& positive, const Tensor2& negative,
                                      double margin) {
  require_same_shape(anchor, positive, "triplet_loss(anchor, positive)");
  require_same_shape(anchor, negative, "triplet_loss(anchor, negative)");
  if (!(margin > 0.0)) throw ConfigError("triplet_loss: margin must be positive");

  TripletLossResult out;
  out.grad_anchor = Tensor2::Zero(anchor.rows(), anchor.cols());
  out.grad_positive = Tensor2::Zero(anchor.rows(), anchor.cols());
  out.grad_negative = Tensor2::Zero(anchor.rows(), anchor.cols());
  const Eigen::Index batch = anchor.rows();
  if (batch == 0) return out;
  const double scale = 1.0 / static_cast<double>(batch);

  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto ap = anchor.row(i) - positive.row(i);
    const auto an = anchor.row(i) - negative.row(i);
    const double hinge = ap.squaredNorm() - an.squaredNorm() + margin;
    if (hinge <= 0.0) continue;
    out.value += hinge;
    ++out.active;
    out.grad_anchor.row(i) = 2.0 * scale * (negative.row(i) - positive.row(i));
    out.grad_positive.row(i) = -2.0 * scale * ap;
    out.grad_negative.row(i) = 2.0 * scale * an;
  }
  out.value *= scale;
  return out;
}

}  // namespace contracate::nn
