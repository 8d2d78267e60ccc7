#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::scm {

namespace detail {

// One stream per concern: the split draws never shift the sampled values.
enum Stream : std::uint64_t { kValues = 1, kSplit = 2, kMixing = 3 };

inline Eigen::MatrixXd random_rotation(std::size_t dim, nn::Rng rng) {
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  return q;
}

inline Vector mix(const Dataset& ds, const Vector& t_causal, const Vector& t_noncausal) {
  Vector t(t_causal.size() + t_noncausal.size());
  t << t_causal, t_noncausal;
  if (ds.mixing) return *ds.mixing * t;
  return t;
}

}  // namespace detail

/// Fig.-1-style synthetic data: X ~ N(0, I_{m+d}), T_C driven by the first m
/// covariates, T_nC by the remaining d, and an additive outcome in T_C and
/// every covariate. Outcome noise is one scalar draw per sample.
inline Dataset generate_synthetic(const ScmParams& params) {
  params.validate();
  if (params.n < 10) throw ConfigError("generate_synthetic: n must be >= 10 for a usable train/eval split");
  const std::size_t m = params.dim_causal;
  const std::size_t d = params.dim_noncausal;

  Dataset ds;
  ds.provenance = GeneratedProvenance{GeneratorKind::Synthetic, params};
  if (params.rotate_treatment) ds.mixing = detail::random_rotation(m + d, nn::Rng(params.seed).split(detail::kMixing));

  nn::Rng rng = nn::Rng(params.seed).split(detail::kValues);
  ds.samples.reserve(params.n);
  for (std::size_t i = 0; i < params.n; ++i) {
    Sample s;
    s.x.resize(static_cast<Eigen::Index>(m + d));
    for (auto& v : s.x) v = rng.normal();
    Vector tc(static_cast<Eigen::Index>(m));
    Vector tnc(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < m; ++j) tc[j] = params.alpha * s.x[j] + params.latent_noise_std * rng.normal();
    for (std::size_t j = 0; j < d; ++j) tnc[j] = params.beta * s.x[m + j] + params.tnc_noise_std() * rng.normal();
    const double y_noise = params.y_noise_std * rng.normal();

    double y = 0.0;
    for (std::size_t j = 0; j < m; ++j) y += params.rho * tc[j];
    for (std::size_t j = 0; j < m + d; ++j) y += params.delta * s.x[j];
    s.y = y + y_noise;
    s.t = detail::mix(ds, tc, tnc);
    s.t_causal = std::move(tc);
    s.t_noncausal = std::move(tnc);
    ds.samples.push_back(std::move(s));
  }
  ds.split = make_split(params.n, params.train_fraction, nn::Rng(params.seed).split(detail::kSplit).seed());
  return ds;
}

/// The scalar linear SCM
///   X = eps_X, T_C = alpha X + eps_TC, T_nC = beta X + eps_TnC,
///   Y = rho T_C + delta X + eps_Y, T = [T_C; T_nC].
inline Dataset generate_linear_scm(const ScmParams& params) {
  params.validate();
  if (params.dim_causal != 1 || params.dim_noncausal != 1) {
    throw ConfigError("generate_linear_scm: the linear SCM has scalar X, T_C and T_nC (dims must be 1)");
  }
  if (params.n < 10) throw ConfigError("generate_linear_scm: n must be >= 10 for a usable train/eval split");

  Dataset ds;
  ds.provenance = GeneratedProvenance{GeneratorKind::LinearScm, params};
  if (params.rotate_treatment) ds.mixing = detail::random_rotation(2, nn::Rng(params.seed).split(detail::kMixing));

  nn::Rng rng = nn::Rng(params.seed).split(detail::kValues);
  ds.samples.reserve(params.n);
  for (std::size_t i = 0; i < params.n; ++i) {
    const double x = rng.normal();
    const double tc = params.alpha * x + params.latent_noise_std * rng.normal();
    const double tnc = params.beta * x + params.tnc_noise_std() * rng.normal();
    const double ey = params.y_noise_std * rng.normal();
    Sample s;
    s.x = Vector::Constant(1, x);
    s.t_causal = Vector::Constant(1, tc);
    s.t_noncausal = Vector::Constant(1, tnc);
    s.t = detail::mix(ds, *s.t_causal, *s.t_noncausal);
    s.y = params.rho * tc + params.delta * x + ey;
    ds.samples.push_back(std::move(s));
  }
  ds.split = make_split(params.n, params.train_fraction, nn::Rng(params.seed).split(detail::kSplit).seed());
  return ds;
}

/// E[Y | do(T_C), X=x] - E[Y | do(T_C'), X=x] under the generating model.
/// Both generators are additive in T_C, so the answer is
/// rho * sum(t_causal - t_causal_other) independently of x.
inline double true_cate(const Provenance& provenance, const Vector& t_causal, const Vector& t_causal_other,
                        const Vector& /*x*/) {
  const auto* gen = std::get_if<GeneratedProvenance>(&provenance);
  if (gen == nullptr) throw UnsupportedError("true_cate: no analytic oracle for externally sourced data");
  if (t_causal.size() != t_causal_other.size() ||
      static_cast<std::size_t>(t_causal.size()) != gen->params.dim_causal) {
    throw ConfigError("true_cate: causal latent vectors do not match the model dimension");
  }
  return gen->params.rho * (t_causal - t_causal_other).sum();
}

/// Draws Y from its structural equation with T_C forced (do-intervention)
/// and X fixed; the outcome noise is sampled fresh.
inline double sample_intervened_outcome(const Provenance& provenance, const Vector& t_causal, const Vector& x,
                                        nn::Rng& rng) {
  const auto* gen = std::get_if<GeneratedProvenance>(&provenance);
  if (gen == nullptr) throw UnsupportedError("sample_intervened_outcome: externally sourced data");
  const auto& p = gen->params;
  return p.rho * t_causal.sum() + p.delta * x.sum() + p.y_noise_std * rng.normal();
}

/// Replaces T_nC by T_nC + N(0, noise_scale^2) and rebuilds the observed
/// treatment. x, y and T_C are untouched, so the result lies in the same
/// equivalence class of treatments as the input.
inline Sample perturb_noncausal(const Sample& sample, nn::Rng& rng, double noise_scale,
                                const std::optional<Eigen::MatrixXd>& mixing = std::nullopt) {
  if (!sample.has_latents()) throw UnsupportedError("perturb_noncausal: sample carries no latent ground truth");
  if (!(noise_scale >= 0.0)) throw ConfigError("perturb_noncausal: noise_scale must be >= 0");
  Sample out = sample;
  if (noise_scale == 0.0) return out;
  for (auto& v : *out.t_noncausal) v += noise_scale * rng.normal();
  Vector t(out.t_causal->size() + out.t_noncausal->size());
  t << *out.t_causal, *out.t_noncausal;
  out.t = mixing ? Vector(*mixing * t) : t;
  return out;
}

/// Adds N(0, std^2) to every outcome.
inline Dataset perturb_outcome_noise(const Dataset& dataset, double std, nn::Rng& rng) {
  if (!(std >= 0.0)) throw ConfigError("perturb_outcome_noise: std must be >= 0");
  Dataset out = dataset;
  if (std == 0.0) return out;
  for (auto& s : out.samples) s.y += std * rng.normal();
  return out;
}

/// The irreducible-noise grid 0.0, 0.1, ..., 1.0.
inline std::vector<double> outcome_noise_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
  return grid;
}

}  // namespace contracate::scm
