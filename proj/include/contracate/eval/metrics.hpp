#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"
#include "contracate/scm/dataset.hpp"
#include "contracate/scm/generators.hpp"

namespace contracate::eval {

using nn::Tensor2;

/// Anything that maps a batch of (x, t) rows to outcome predictions.
template <typename M>
concept OutcomeModel = requires(const M& m, const Tensor2& x, const Tensor2& t) {
  { m.predict_batch(x, t) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Anything exposing a treatment representation psi(t) for a batch.
template <typename M>
concept RepresentationModel = requires(const M& m, const Tensor2& t) {
  { m.treatment_representation_batch(t) } -> std::convertible_to<Tensor2>;
};

/// A sample and a counterpart with a different treatment. `original.y` and
/// `perturbed.y` are the true outcomes under the two treatments.
struct EvalPair {
  scm::Sample original;
  scm::Sample perturbed;
};

/// Builds pairs by perturbing the non-causal latents of every sample in
/// `split`, `draws` times each. The outcome is shared (y' = y): only T_nC
/// changes, which has no effect on Y.
inline std::vector<EvalPair> make_noncausal_pairs(const scm::Dataset& ds, scm::Split split, double noise_scale,
                                                  nn::Rng& rng, std::size_t draws = 1) {
  std::vector<EvalPair> pairs;
  for (auto i : ds.indices(split)) {
    for (std::size_t k = 0; k < draws; ++k) {
      pairs.push_back({ds.samples[i], scm::perturb_noncausal(ds.samples[i], rng, noise_scale, ds.mixing)});
    }
  }
  return pairs;
}

/// sqrt(mean(((f(x,t) - f(x,t')) - (y - y'))^2)).
template <OutcomeModel M>
double pehe(const M& model, const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ConfigError("pehe: empty pair list");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto dx = pairs.front().original.x.size();
  const auto dt = pairs.front().original.t.size();
  Tensor2 x(n, dx), x2(n, dx), t(n, dt), t2(n, dt);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    x.row(i) = p.original.x.transpose();
    t.row(i) = p.original.t.transpose();
    x2.row(i) = p.perturbed.x.transpose();
    t2.row(i) = p.perturbed.t.transpose();
  }
  const Eigen::VectorXd f = model.predict_batch(x, t);
  const Eigen::VectorXd f2 = model.predict_batch(x2, t2);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    const double err = (f(i) - f2(i)) - (p.original.y - p.perturbed.y);
    sum += err * err;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

/// MAE and RMSE of outcome predictions over the given rows.
template <OutcomeModel M>
ErrorMetrics mae_rmse(const M& model, const scm::Dataset& ds, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ConfigError("mae_rmse: no rows to evaluate");
  const Eigen::VectorXd pred = model.predict_batch(scm::covariate_matrix(ds, rows), scm::treatment_matrix(ds, rows));
  ErrorMetrics m;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double r = pred(static_cast<Eigen::Index>(i)) - ds.samples[rows[i]].y;
    m.mae += std::abs(r);
    m.rmse += r * r;
  }
  m.mae /= static_cast<double>(rows.size());
  m.rmse = std::sqrt(m.rmse / static_cast<double>(rows.size()));
  return m;
}

/// Over the eval split.
template <OutcomeModel M>
ErrorMetrics mae_rmse(const M& model, const scm::Dataset& ds) {
  return mae_rmse(model, ds, ds.eval_indices());
}

struct SeedMetrics {
  std::uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double pehe = 0.0;
};

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double pehe = 0.0;
  std::vector<SeedMetrics> per_seed;
  /// Standard errors of the means; present only with >= 2 seeds.
  std::optional<double> mae_stderr;
  std::optional<double> rmse_stderr;
  std::optional<double> pehe_stderr;
};

namespace detail {

inline std::pair<double, std::optional<double>> mean_stderr(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

}  // namespace detail

/// Mean and standard error over seeds. Per-seed rows are sorted by seed so
/// the result does not depend on the order results arrived in.
inline MetricsReport aggregate(std::vector<SeedMetrics> per_seed) {
  if (per_seed.empty()) throw ConfigError("aggregate: no per-seed metrics");
  std::sort(per_seed.begin(), per_seed.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  std::vector<double> mae, rmse, pe;
  for (const auto& s : per_seed) {
    mae.push_back(s.mae);
    rmse.push_back(s.rmse);
    pe.push_back(s.pehe);
  }
  MetricsReport r;
  std::tie(r.mae, r.mae_stderr) = detail::mean_stderr(mae);
  std::tie(r.rmse, r.rmse_stderr) = detail::mean_stderr(rmse);
  std::tie(r.pehe, r.pehe_stderr) = detail::mean_stderr(pe);
  r.per_seed = std::move(per_seed);
  return r;
}

}  // namespace contracate::eval
