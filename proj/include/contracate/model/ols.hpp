#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/model/linear_model.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::model {

struct LeastSquaresResult {
  Eigen::VectorXd coefficients;
  /// Set when the normal matrix was (numerically) singular and the ridge
  /// fallback was used instead of the exact solve.
  bool ridge_fallback = false;
  double ridge_lambda = 0.0;
  /// Smallest over largest eigenvalue of the normal matrix.
  double reciprocal_condition = 0.0;
};

inline constexpr double kRidgeLambda = 1e-8;
inline constexpr double kSingularityTolerance = 1e-10;

/// Solves min |A c - b|^2 through the normal equations A'A c = A'b.
inline LeastSquaresResult normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size()) throw ConfigError("normal_equations: row count mismatch");
  if (a.rows() == 0 || a.cols() == 0) throw ConfigError("normal_equations: empty design");
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::VectorXd rhs = a.transpose() * b;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  LeastSquaresResult out;
  out.reciprocal_condition = hi > 0.0 ? std::max(lo, 0.0) / hi : 0.0;
  if (out.reciprocal_condition > kSingularityTolerance) {
    out.coefficients = gram.llt().solve(rhs);
    return out;
  }
  out.ridge_fallback = true;
  out.ridge_lambda = kRidgeLambda;
  const Eigen::MatrixXd regularized = gram + kRidgeLambda * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  out.coefficients = regularized.ldlt().solve(rhs);
  return out;
}

struct OlsFit {
  LinearCateModel model;
  bool ridge_fallback = false;
  double reciprocal_condition = 0.0;
};

/// Exact least-squares outcome model on the rows `rows` of `dataset`.
///
/// With include_noncausal the design is (t, x, 1). Without it the design is
/// (t_causal, x, 1) and the non-causal treatment weights are fixed at zero,
/// which requires latents and the identity mixing.
inline OlsFit fit_ols(const scm::Dataset& dataset, bool include_noncausal, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ConfigError("fit_ols: no rows");
  const auto dx = static_cast<Eigen::Index>(dataset.dim_x());
  const auto dt = static_cast<Eigen::Index>(dataset.dim_t());
  Eigen::Index dtc = dt;
  if (!include_noncausal) {
    if (!dataset.has_latents()) throw UnsupportedError("fit_ols: causal-only design needs latent ground truth");
    if (dataset.mixing) throw UnsupportedError("fit_ols: causal-only design needs the identity mixing");
    dtc = dataset.samples.front().t_causal->size();
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a(n, dtc + dx + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = dataset.samples[rows[static_cast<std::size_t>(i)]];
    a.row(i).head(dtc) = include_noncausal ? s.t.transpose() : s.t_causal->transpose();
    a.row(i).segment(dtc, dx) = s.x.transpose();
    a(i, dtc + dx) = 1.0;
    b(i) = s.y;
  }
  const auto solved = normal_equations(a, b);

  Eigen::VectorXd w_t = Eigen::VectorXd::Zero(dt);
  w_t.head(dtc) = solved.coefficients.head(dtc);
  const Eigen::VectorXd w_x = solved.coefficients.segment(dtc, dx);
  return OlsFit{LinearCateModel(w_t, w_x, solved.coefficients(dtc + dx)), solved.ridge_fallback,
                solved.reciprocal_condition};
}

inline OlsFit fit_ols(const scm::Dataset& dataset, bool include_noncausal) {
  return fit_ols(dataset, include_noncausal, dataset.train_indices());
}

}  // namespace contracate::model
