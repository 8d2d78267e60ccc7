#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/eval/metrics.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::eval {

/// R^2 of the best affine prediction of `target` (n x k) from `features`
/// (n x p), pooled over target columns: 1 - sum(SSE) / sum(SST).
/// Rank-deficient features are handled by a complete orthogonal
/// decomposition, so constant or duplicated columns are fine.
inline double linear_probe_r2(const Eigen::MatrixXd& features, const Eigen::MatrixXd& target) {
  if (features.rows() != target.rows() || features.rows() < 2) throw ConfigError("linear_probe_r2: bad shapes");
  const Eigen::Index n = features.rows();
  const Eigen::RowVectorXd mean = target.colwise().mean();
  const double sst = (target.rowwise() - mean).squaredNorm();
  if (!(sst > 1e-12 * static_cast<double>(n))) {
    throw ConfigError("linear_probe_r2: target has no variance; R^2 is undefined");
  }
  Eigen::MatrixXd design(n, features.cols() + 1);
  design.leftCols(features.cols()) = features;
  design.col(features.cols()).setOnes();
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::MatrixXd coef = cod.solve(target);
  const double sse = (design * coef - target).squaredNorm();
  return std::max(0.0, 1.0 - sse / sst);
}

/// Residual of `target` after the best affine fit on `covariates`.
inline Eigen::MatrixXd residualize(const Eigen::MatrixXd& target, const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd design(covariates.rows(), covariates.cols() + 1);
  design.leftCols(covariates.cols()) = covariates;
  design.col(covariates.cols()).setOnes();
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  return target - design * cod.solve(target);
}

struct ProbeResult {
  double r2_causal = 0.0;
  double r2_noncausal = 0.0;
};

/// Linear probes from psi(t) to the causal latents and to the part of the
/// non-causal latents not explained by x. A representation that identifies
/// the causal block and drops the non-causal one scores high on the first
/// and near zero on the second.
inline ProbeResult probe_representation(const Eigen::MatrixXd& psi, const scm::Dataset& ds,
                                        const std::vector<std::size_t>& rows) {
  if (!ds.has_latents()) throw UnsupportedError("identifiability_probe: dataset carries no latents");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = ds.samples.front().t_causal->size();
  const auto d = ds.samples.front().t_noncausal->size();
  Eigen::MatrixXd tc(n, m), tnc(n, d), x(n, static_cast<Eigen::Index>(ds.dim_x()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = ds.samples[rows[static_cast<std::size_t>(i)]];
    tc.row(i) = s.t_causal->transpose();
    tnc.row(i) = s.t_noncausal->transpose();
    x.row(i) = s.x.transpose();
  }
  ProbeResult out;
  out.r2_causal = linear_probe_r2(psi, tc);
  out.r2_noncausal = linear_probe_r2(psi, residualize(tnc, x));
  return out;
}

template <RepresentationModel M>
ProbeResult identifiability_probe(const M& model, const scm::Dataset& ds, const std::vector<std::size_t>& rows) {
  const Eigen::MatrixXd psi = model.treatment_representation_batch(scm::treatment_matrix(ds, rows));
  return probe_representation(psi, ds, rows);
}

/// Over every row of the dataset.
template <RepresentationModel M>
ProbeResult identifiability_probe(const M& model, const scm::Dataset& ds) {
  return identifiability_probe(model, ds, scm::all_indices(ds));
}

/// mean |psi(t) - psi(t')| over non-causal perturbations divided by mean
/// |psi(t) - psi(t_other)| over pairs of distinct samples. Scale-free; small
/// values mean psi ignores the non-causal block relative to how much it
/// separates different samples.
template <RepresentationModel M>
double representation_invariance_ratio(const M& model, const scm::Dataset& ds, const std::vector<std::size_t>& rows,
                                       double noise_scale, nn::Rng& rng) {
  if (rows.size() < 2) throw ConfigError("representation_invariance_ratio: need at least two rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Tensor2 t(n, static_cast<Eigen::Index>(ds.dim_t())), tp(n, t.cols()), to(n, t.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = ds.samples[rows[static_cast<std::size_t>(i)]];
    t.row(i) = s.t.transpose();
    tp.row(i) = scm::perturb_noncausal(s, rng, noise_scale, ds.mixing).t.transpose();
    std::size_t other = rng.index(rows.size() - 1);
    if (other >= static_cast<std::size_t>(i)) ++other;
    to.row(i) = ds.samples[rows[other]].t.transpose();
  }
  const Tensor2 h = model.treatment_representation_batch(t);
  const Tensor2 hp = model.treatment_representation_batch(tp);
  const Tensor2 ho = model.treatment_representation_batch(to);
  const double perturbed = (h - hp).rowwise().norm().mean();
  const double other = (h - ho).rowwise().norm().mean();
  if (!(other > 0.0)) throw ConfigError("representation_invariance_ratio: representation is constant");
  return perturbed / other;
}

}  // namespace contracate::eval
