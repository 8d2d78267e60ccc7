#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "contracate/error.hpp"

namespace contracate::io {

struct Pca {
  Eigen::RowVectorXd mean;
  /// Columns are principal directions, by decreasing variance.
  Eigen::MatrixXd components;
  Eigen::VectorXd explained_variance;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const {
    if (data.cols() != mean.size()) throw ConfigError("Pca::transform: column count mismatch");
    return (data.rowwise() - mean) * components;
  }
};

/// Exact eigendecomposition of the sample covariance; keeps the top k.
inline Pca fit_pca(const Eigen::MatrixXd& data, std::size_t k) {
  if (data.rows() < 2) throw ConfigError("fit_pca: need at least two rows");
  if (k < 1 || k > static_cast<std::size_t>(data.cols())) throw ConfigError("fit_pca: k must lie in [1, cols]");
  Pca p;
  p.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - p.mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const auto n = static_cast<Eigen::Index>(k);
  const Eigen::Index d = data.cols();
  p.components.resize(d, n);
  p.explained_variance.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Eigen sorts eigenvalues ascending.
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.col(i) = v;
    p.explained_variance(i) = eig.eigenvalues()(d - 1 - i);
  }
  return p;
}

}  // namespace contracate::io
