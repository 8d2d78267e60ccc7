#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::eval {

/// Member lambda of the family of outcome models
///   M(T, X) = rho T_C + lambda (delta / beta) T_nC + (1 - lambda) delta X
/// over the scalar linear SCM. Every member matches E[Y | T_C, X] when T_nC
/// sits at its conditional mean beta X; only lambda = 0 is causal.
struct BiasedFamily {
  double rho = 1.0;
  double delta = 1.0;
  double beta = 1.0;
  double lambda = 0.0;

  double predict(double t_causal, double t_noncausal, double x) const {
    return rho * t_causal + lambda * (delta / beta) * t_noncausal + (1.0 - lambda) * delta * x;
  }
};

struct Theorem1Gaps {
  double conditional_mean_gap = 0.0;
  double intervention_gap = 0.0;
};

struct MonteCarloGaps {
  Theorem1Gaps estimate;
  double conditional_mean_se = 0.0;
  double intervention_se = 0.0;
  std::size_t draws = 0;
};

struct Theorem1Report {
  Theorem1Gaps analytic;
  MonteCarloGaps monte_carlo;

  bool conditional_mean_within(double k = 3.0) const {
    return std::abs(monte_carlo.estimate.conditional_mean_gap - analytic.conditional_mean_gap) <=
           k * monte_carlo.conditional_mean_se + 1e-9;
  }
  bool intervention_within(double k = 3.0) const {
    return std::abs(monte_carlo.estimate.intervention_gap - analytic.intervention_gap) <=
           k * monte_carlo.intervention_se + 1e-9;
  }
};

namespace detail {

inline BiasedFamily family_for(const scm::ScmParams& params, double lambda) {
  if (params.beta == 0.0) throw ConfigError("theorem1: beta must be non-zero");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("theorem1: lambda must lie in [0, 1]");
  return BiasedFamily{params.rho, params.delta, params.beta, lambda};
}

}  // namespace detail

/// Closed form. The conditional-mean gap is M - E[Y | T_C, X] at
/// T_nC = beta X, which vanishes identically; the intervention gap is the
/// CATE error for a pair that differs by delta_tnc in T_nC only.
inline Theorem1Gaps theorem1_demo(const scm::ScmParams& params, double lambda, double delta_tnc) {
  const BiasedFamily f = detail::family_for(params, lambda);
  Theorem1Gaps g;
  g.conditional_mean_gap = 0.0;
  g.intervention_gap = f.lambda * (f.delta / f.beta) * delta_tnc;
  return g;
}

/// Simulation of the same two quantities from the structural equations.
///
/// conditional_mean_gap: mean over observational draws of
///   M(T_C, T_nC, X) - (rho T_C + delta X).
/// intervention_gap: mean over draws of the model's effect estimate for
///   T -> T' (T_nC shifted by delta_tnc) minus the simulated effect
///   Y(do T') - Y(do T), each outcome with its own noise draw.
inline MonteCarloGaps theorem1_monte_carlo(const scm::ScmParams& params, double lambda, double delta_tnc,
                                           std::size_t draws, nn::Rng& rng) {
  const BiasedFamily f = detail::family_for(params, lambda);
  if (draws < 2) throw ConfigError("theorem1_monte_carlo: need at least two draws");
  double s1 = 0.0, ss1 = 0.0, s2 = 0.0, ss2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double x = rng.normal();
    const double tc = params.alpha * x + params.latent_noise_std * rng.normal();
    const double tnc = params.beta * x + params.tnc_noise_std() * rng.normal();

    const double cm = f.predict(tc, tnc, x) - (params.rho * tc + params.delta * x);
    s1 += cm;
    ss1 += cm * cm;

    const double y = params.rho * tc + params.delta * x + params.y_noise_std * rng.normal();
    const double y_shift = params.rho * tc + params.delta * x + params.y_noise_std * rng.normal();
    const double err = (f.predict(tc, tnc + delta_tnc, x) - f.predict(tc, tnc, x)) - (y_shift - y);
    s2 += err;
    ss2 += err * err;
  }
  const auto n = static_cast<double>(draws);
  auto se = [n](double s, double ss) {
    const double mean = s / n;
    const double var = std::max(0.0, (ss - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
  };
  MonteCarloGaps out;
  out.draws = draws;
  out.estimate.conditional_mean_gap = s1 / n;
  out.estimate.intervention_gap = s2 / n;
  out.conditional_mean_se = se(s1, ss1);
  out.intervention_se = se(s2, ss2);
  return out;
}

inline Theorem1Report theorem1_report(const scm::ScmParams& params, double lambda, double delta_tnc,
                                      std::size_t draws, nn::Rng& rng) {
  return {theorem1_demo(params, lambda, delta_tnc), theorem1_monte_carlo(params, lambda, delta_tnc, draws, rng)};
}

}  // namespace contracate::eval
