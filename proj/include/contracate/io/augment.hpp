#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/scm/dataset.hpp"
#include "contracate/scm/generators.hpp"

namespace contracate::io {

struct AugmentResult {
  scm::Dataset dataset;
  /// extra_dims x dim_x matrix P; new column j is coupling * (P x)_j + noise.
  Eigen::MatrixXd projection;
};

/// Appends `extra_dims` non-causal treatment columns correlated with the
/// covariates. The existing treatment becomes the causal latent block; the
/// outcome is left alone, so the new columns cannot affect it.
inline AugmentResult augment_noncausal(const scm::Dataset& dataset, std::size_t extra_dims, double coupling,
                                       double noise_std, nn::Rng& rng) {
  if (extra_dims < 1) throw ConfigError("augment_noncausal: extra_dims must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("augment_noncausal: noise_std must be >= 0");
  if (dataset.empty()) throw ConfigError("augment_noncausal: empty dataset");
  if (dataset.mixing) throw UnsupportedError("augment_noncausal: treatment has a non-identity mixing");

  const auto dx = static_cast<Eigen::Index>(dataset.dim_x());
  const auto k = static_cast<Eigen::Index>(extra_dims);
  AugmentResult out;
  out.projection.resize(k, dx);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dx));
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < dx; ++j) out.projection(i, j) = scale * rng.normal();

  out.dataset = dataset;
  for (auto& s : out.dataset.samples) {
    scm::Vector extra = coupling * (out.projection * s.x);
    for (auto& v : extra) v += noise_std * rng.normal();
    scm::Vector t(s.t.size() + k);
    t << s.t, extra;
    s.t_causal = s.t;
    s.t_noncausal = std::move(extra);
    s.t = std::move(t);
  }
  return out;
}

struct SemiSyntheticParams {
  std::size_t n = 5000;
  std::size_t causal_dims = 8;
  std::size_t extra_dims = 8;
  double coupling = 1.0;
  double noise_std = 1.0;
  double y_noise_std = 0.5;
  std::uint64_t seed = 0;
};

/// Stand-in for a real dataset whose treatment is entirely causal: the
/// synthetic generator with causal_dims causal latents (its own non-causal
/// block is dropped from t), then augmented with extra_dims correlated
/// non-causal columns.
inline scm::Dataset make_semi_synthetic(const SemiSyntheticParams& p) {
  scm::ScmParams core;
  core.n = p.n;
  core.dim_causal = p.causal_dims;
  core.dim_noncausal = p.causal_dims;
  core.y_noise_std = p.y_noise_std;
  core.seed = p.seed;
  scm::Dataset ds = scm::generate_synthetic(core);
  for (auto& s : ds.samples) {
    s.t = *s.t_causal;
    s.t_causal.reset();
    s.t_noncausal.reset();
  }
  ds.provenance = scm::ExternalProvenance{"semi-synthetic core", 0};
  nn::Rng rng = nn::Rng(p.seed).split(31);
  return augment_noncausal(ds, p.extra_dims, p.coupling, p.noise_std, rng).dataset;
}

}  // namespace contracate::io
