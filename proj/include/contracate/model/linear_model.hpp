#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/dense.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::model {

using nn::Tensor2;

/// f(x, t) = w_t . t + w_x . x + bias, with treatment representation
/// psi(t) = w_t (elementwise) t.
class LinearCateModel {
 public:
  LinearCateModel() = default;
  LinearCateModel(std::size_t dim_x, std::size_t dim_t)
      : w_t_(Tensor2::Zero(1, static_cast<Eigen::Index>(dim_t))),
        w_x_(Tensor2::Zero(1, static_cast<Eigen::Index>(dim_x))),
        bias_(Tensor2::Zero(1, 1)),
        g_w_t_(Tensor2::Zero(1, static_cast<Eigen::Index>(dim_t))),
        g_w_x_(Tensor2::Zero(1, static_cast<Eigen::Index>(dim_x))),
        g_bias_(Tensor2::Zero(1, 1)) {}

  LinearCateModel(const Eigen::VectorXd& w_t, const Eigen::VectorXd& w_x, double bias)
      : LinearCateModel(static_cast<std::size_t>(w_x.size()), static_cast<std::size_t>(w_t.size())) {
    w_t_.row(0) = w_t.transpose();
    w_x_.row(0) = w_x.transpose();
    bias_(0, 0) = bias;
  }

  std::size_t dim_x() const { return static_cast<std::size_t>(w_x_.cols()); }
  std::size_t dim_t() const { return static_cast<std::size_t>(w_t_.cols()); }
  std::size_t repr_dim() const { return dim_t(); }

  Eigen::VectorXd treatment_weights() const { return w_t_.row(0).transpose(); }
  Eigen::VectorXd covariate_weights() const { return w_x_.row(0).transpose(); }
  double bias() const { return bias_(0, 0); }

  double predict(const Eigen::VectorXd& x, const Eigen::VectorXd& t) const {
    check_dims(x.size(), t.size());
    return w_t_.row(0).dot(t.transpose()) + w_x_.row(0).dot(x.transpose()) + bias_(0, 0);
  }

  Eigen::VectorXd predict_batch(const Tensor2& x, const Tensor2& t) const {
    check_dims(x.cols(), t.cols());
    if (x.rows() != t.rows()) throw ConfigError("LinearCateModel: x and t row counts differ");
    Eigen::VectorXd out = t * w_t_.row(0).transpose() + x * w_x_.row(0).transpose();
    out.array() += bias_(0, 0);
    return out;
  }

  Eigen::VectorXd treatment_representation(const Eigen::VectorXd& t) const {
    if (static_cast<std::size_t>(t.size()) != dim_t()) throw ConfigError("LinearCateModel: treatment dimension mismatch");
    return w_t_.row(0).transpose().cwiseProduct(t);
  }

  Tensor2 treatment_representation_batch(const Tensor2& t) const {
    if (static_cast<std::size_t>(t.cols()) != dim_t()) throw ConfigError("LinearCateModel: treatment dimension mismatch");
    Tensor2 out = t;
    out.array().rowwise() *= w_t_.row(0).array();
    return out;
  }

  // Training interface: `t` may carry extra rows below the first x.rows(),
  // which only feed the representation.
  Eigen::VectorXd forward_train(const Tensor2& x, const Tensor2& t, Tensor2& representation) {
    const Eigen::Index b = x.rows();
    check_dims(x.cols(), t.cols());
    x_cache_ = x;
    t_cache_ = t;
    cached_ = true;
    representation = treatment_representation_batch(t);
    Eigen::VectorXd pred = t.topRows(b) * w_t_.row(0).transpose() + x * w_x_.row(0).transpose();
    pred.array() += bias_(0, 0);
    return pred;
  }

  void backward_train(const Eigen::VectorXd& grad_pred, const Tensor2& grad_representation) {
    if (!cached_) throw StateError("LinearCateModel::backward_train without forward_train");
    const Eigen::Index b = x_cache_.rows();
    g_w_t_.row(0) += grad_pred.transpose() * t_cache_.topRows(b);
    g_w_t_.row(0) += grad_representation.cwiseProduct(t_cache_).colwise().sum();
    g_w_x_.row(0) += grad_pred.transpose() * x_cache_;
    g_bias_(0, 0) += grad_pred.sum();
  }

  void zero_grad() {
    g_w_t_.setZero();
    g_w_x_.setZero();
    g_bias_.setZero();
  }

  std::vector<nn::Parameter> parameters() {
    return {nn::Parameter{"linear.w_t", w_t_, g_w_t_}, nn::Parameter{"linear.w_x", w_x_, g_w_x_},
            nn::Parameter{"linear.bias", bias_, g_bias_}};
  }

  Tensor2& raw_treatment_weights() { return w_t_; }
  Tensor2& raw_covariate_weights() { return w_x_; }
  Tensor2& raw_bias() { return bias_; }

 private:
  void check_dims(Eigen::Index dx, Eigen::Index dt) const {
    if (static_cast<std::size_t>(dx) != dim_x() || static_cast<std::size_t>(dt) != dim_t()) {
      throw ConfigError("LinearCateModel: expected x of dim " + std::to_string(dim_x()) + " and t of dim " +
                        std::to_string(dim_t()) + ", got " + std::to_string(dx) + " and " + std::to_string(dt));
    }
  }

  Tensor2 w_t_;
  Tensor2 w_x_;
  Tensor2 bias_;
  Tensor2 g_w_t_;
  Tensor2 g_w_x_;
  Tensor2 g_bias_;

  bool cached_ = false;
  Tensor2 x_cache_;
  Tensor2 t_cache_;
};

}  // namespace contracate::model
