#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/layer_stack.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::model {

using nn::Tensor2;

/// Layer sizes of the two-branch estimator.
struct CateArchitecture {
  std::size_t dim_x = 0;
  std::size_t dim_t = 0;
  std::size_t t_hidden = 32;
  std::size_t repr_dim = 32;
  std::size_t x_hidden = 32;
  std::vector<std::size_t> head_hidden = {64, 32};
};

/// Two-branch outcome network f(x, t) = head([h_t(t), h_x(x)]).
///
///   t-branch: dim_t -> t_hidden (ReLU) -> repr_dim (Identity)   = h_t
///   x-branch: dim_x -> x_hidden (ReLU)                          = h_x
///   head:     repr_dim + x_hidden -> 64 (ReLU) -> 32 (ReLU) -> 1
///
/// h_t is the treatment representation the contrastive term acts on.
class CateModel {
 public:
  CateModel() = default;
  CateModel(nn::LayerStack t_branch, nn::LayerStack x_branch, nn::LayerStack head)
      : t_branch_(std::move(t_branch)), x_branch_(std::move(x_branch)), head_(std::move(head)) {
    if (head_.in_dim() != t_branch_.out_dim() + x_branch_.out_dim()) {
      throw ConfigError("CateModel: head input width must equal repr_dim + x_hidden");
    }
    if (head_.out_dim() != 1) throw ConfigError("CateModel: head must produce a scalar");
  }

  static CateModel create(const CateArchitecture& arch, nn::Rng& rng) {
    if (arch.dim_x == 0 || arch.dim_t == 0) throw ConfigError("CateModel: input dimensions must be positive");
    using nn::Activation;
    auto t_branch = nn::LayerStack::glorot({arch.dim_t, {arch.t_hidden, arch.repr_dim}, {Activation::ReLU, Activation::Identity}}, rng);
    auto x_branch = nn::LayerStack::glorot({arch.dim_x, {arch.x_hidden}, {Activation::ReLU}}, rng);
    nn::StackSpec head{arch.repr_dim + arch.x_hidden, arch.head_hidden, {}};
    head.activations.assign(arch.head_hidden.size(), Activation::ReLU);
    head.widths.push_back(1);
    head.activations.push_back(Activation::Identity);
    return CateModel(std::move(t_branch), std::move(x_branch), nn::LayerStack::glorot(head, rng));
  }

  std::size_t dim_x() const { return x_branch_.in_dim(); }
  std::size_t dim_t() const { return t_branch_.in_dim(); }
  std::size_t repr_dim() const { return t_branch_.out_dim(); }

  nn::LayerStack& t_branch() { return t_branch_; }
  nn::LayerStack& x_branch() { return x_branch_; }
  nn::LayerStack& head() { return head_; }
  const nn::LayerStack& t_branch() const { return t_branch_; }
  const nn::LayerStack& x_branch() const { return x_branch_; }
  const nn::LayerStack& head() const { return head_; }

  Eigen::VectorXd predict_batch(const Tensor2& x, const Tensor2& t) const {
    check(x.cols(), t.cols());
    if (x.rows() != t.rows()) throw ConfigError("CateModel: x and t row counts differ");
    Tensor2 joint(x.rows(), static_cast<Eigen::Index>(repr_dim() + x_branch_.out_dim()));
    joint.leftCols(static_cast<Eigen::Index>(repr_dim())) = t_branch_.infer(t);
    joint.rightCols(static_cast<Eigen::Index>(x_branch_.out_dim())) = x_branch_.infer(x);
    return head_.infer(joint).col(0);
  }

  double predict(const Eigen::VectorXd& x, const Eigen::VectorXd& t) const {
    return predict_batch(x.transpose(), t.transpose())(0);
  }

  Tensor2 treatment_representation_batch(const Tensor2& t) const {
    if (static_cast<std::size_t>(t.cols()) != dim_t()) throw ConfigError("CateModel: treatment dimension mismatch");
    return t_branch_.infer(t);
  }

  Eigen::VectorXd treatment_representation(const Eigen::VectorXd& t) const {
    return treatment_representation_batch(t.transpose()).row(0).transpose();
  }

  /// Training forward pass. Rows of `t` past x.rows() only run through the
  /// t-branch; their representations are returned for the contrastive term.
  Eigen::VectorXd forward_train(const Tensor2& x, const Tensor2& t, Tensor2& representation) {
    check(x.cols(), t.cols());
    const Eigen::Index b = x.rows();
    if (t.rows() < b) throw ConfigError("CateModel::forward_train: fewer treatment rows than covariate rows");
    const auto r = static_cast<Eigen::Index>(repr_dim());
    representation = t_branch_.forward(t);
    const Tensor2& hx = x_branch_.forward(x);
    Tensor2 joint(b, r + hx.cols());
    joint.leftCols(r) = representation.topRows(b);
    joint.rightCols(hx.cols()) = hx;
    batch_ = b;
    return head_.forward(joint).col(0);
  }

  void backward_train(const Eigen::VectorXd& grad_pred, const Tensor2& grad_representation) {
    const auto r = static_cast<Eigen::Index>(repr_dim());
    Tensor2 g_joint = head_.backward(Tensor2(grad_pred));
    Tensor2 g_repr = grad_representation;
    g_repr.topRows(batch_) += g_joint.leftCols(r);
    t_branch_.backward(g_repr);
    x_branch_.backward(g_joint.rightCols(g_joint.cols() - r));
  }

  void zero_grad() {
    t_branch_.zero_grad();
    x_branch_.zero_grad();
    head_.zero_grad();
  }

  std::vector<nn::Parameter> parameters() {
    std::vector<nn::Parameter> out = t_branch_.parameters("t_branch");
    for (auto& p : x_branch_.parameters("x_branch")) out.push_back(p);
    for (auto& p : head_.parameters("head")) out.push_back(p);
    return out;
  }

 private:
  void check(Eigen::Index dx, Eigen::Index dt) const {
    if (static_cast<std::size_t>(dx) != dim_x() || static_cast<std::size_t>(dt) != dim_t()) {
      throw ConfigError("CateModel: expected x of dim " + std::to_string(dim_x()) + " and t of dim " +
                        std::to_string(dim_t()) + ", got " + std::to_string(dx) + " and " + std::to_string(dt));
    }
  }

  nn::LayerStack t_branch_;
  nn::LayerStack x_branch_;
  nn::LayerStack head_;
  Eigen::Index batch_ = 0;
};

}  // namespace contracate::model
