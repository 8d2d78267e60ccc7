#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::scm {

using Vector = Eigen::VectorXd;

/// Coefficients and noise scales of the generating structural model.
///
/// Both generators share one parameter block:
///   T_C  = alpha * X_causal + eps_TC
///   T_nC = beta  * X_noncausal + eps_TnC
///   Y    = rho * sum(T_C) + delta * sum(X) + eps_Y
/// With unit coefficients the synthetic generator is the reference
/// pseudocode; the linear SCM is the one-dimensional special case.
struct ScmParams {
  std::size_t n = 1000;
  std::size_t dim_causal = 5;
  std::size_t dim_noncausal = 5;
  double alpha = 1.0;
  double beta = 1.0;
  double rho = 1.0;
  double delta = 1.0;
  double y_noise_std = 0.5;
  double latent_noise_std = 1.0;
  /// Overrides latent_noise_std for T_nC only. Zero makes T_nC an exact
  /// copy of beta * X, which is how collinearity is demonstrated.
  std::optional<double> noncausal_noise_std;
  /// Applies a seeded random rotation to concat(T_C, T_nC).
  bool rotate_treatment = false;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;

  double tnc_noise_std() const { return noncausal_noise_std.value_or(latent_noise_std); }

  void validate() const {
    if (dim_causal < 1) throw ConfigError("ScmParams.dim_causal must be >= 1");
    if (dim_noncausal < 1) throw ConfigError("ScmParams.dim_noncausal must be >= 1");
    if (!(y_noise_std >= 0.0)) throw ConfigError("ScmParams.y_noise_std must be >= 0");
    if (!(latent_noise_std > 0.0)) throw ConfigError("ScmParams.latent_noise_std must be > 0");
    if (noncausal_noise_std && !(*noncausal_noise_std >= 0.0)) {
      throw ConfigError("ScmParams.noncausal_noise_std must be >= 0");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ConfigError("ScmParams.train_fraction must lie in (0, 1)");
    }
  }
};

/// One observation. The latent blocks are present only for generated or
/// augmented data.
struct Sample {
  Vector x;
  Vector t;
  double y = 0.0;
  std::optional<Vector> t_causal;
  std::optional<Vector> t_noncausal;

  bool has_latents() const { return t_causal.has_value() && t_noncausal.has_value(); }
};

enum class Split { Train, Eval };

enum class GeneratorKind { Synthetic, LinearScm };

inline const char* to_string(GeneratorKind k) { return k == GeneratorKind::Synthetic ? "synthetic" : "linear"; }

struct GeneratedProvenance {
  GeneratorKind kind = GeneratorKind::Synthetic;
  ScmParams params;
};

struct ExternalProvenance {
  std::string source;
  std::uint64_t content_hash = 0;
};

using Provenance = std::variant<GeneratedProvenance, ExternalProvenance>;

struct Dataset {
  std::vector<Sample> samples;
  std::vector<Split> split;
  Provenance provenance = ExternalProvenance{};
  /// Maps concat(t_causal, t_noncausal) to t when the mixing is not the
  /// identity.
  std::optional<Eigen::MatrixXd> mixing;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t dim_x() const { return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().x.size()); }
  std::size_t dim_t() const { return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().t.size()); }

  bool has_latents() const {
    for (const auto& s : samples)
      if (!s.has_latents()) return false;
    return !samples.empty();
  }

  std::vector<std::size_t> indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == which) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_indices() const { return indices(Split::Train); }
  std::vector<std::size_t> eval_indices() const { return indices(Split::Eval); }

  const GeneratedProvenance* generated() const { return std::get_if<GeneratedProvenance>(&provenance); }
};

/// Deterministic split: a seeded permutation of row positions, the first
/// round(train_fraction * n) of which are training rows.
inline std::vector<Split> make_split(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<Split> out(n, Split::Eval);
  for (std::size_t i = 0; i < n_train && i < n; ++i) out[order[i]] = Split::Train;
  return out;
}

/// Stacks the covariates of the selected rows into a matrix.
inline nn::Tensor2 covariate_matrix(const Dataset& ds, const std::vector<std::size_t>& rows) {
  nn::Tensor2 m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.dim_x()));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = ds.samples[rows[i]].x.transpose();
  return m;
}

inline nn::Tensor2 treatment_matrix(const Dataset& ds, const std::vector<std::size_t>& rows) {
  nn::Tensor2 m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.dim_t()));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = ds.samples[rows[i]].t.transpose();
  return m;
}

inline std::vector<double> outcomes(const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(ds.samples[r].y);
  return y;
}

inline std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace contracate::scm
