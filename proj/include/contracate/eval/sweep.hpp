#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/eval/metrics.hpp"
#include "contracate/model/any_model.hpp"
#include "contracate/model/train.hpp"
#include "contracate/scm/generators.hpp"

namespace contracate::eval {

/// Runs task(i) for i in [0, n) on `jobs` threads. Tasks must write only to
/// their own slot of any shared output. The first exception (lowest task
/// index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// A named training configuration compared in a sweep.
struct Variant {
  std::string name;
  model::TrainConfig config;
  model::Family family = model::Family::Network;
};

inline std::vector<Variant> default_variants(bool semi_synthetic = false) {
  using model::Mode;
  using model::TrainConfig;
  auto make = semi_synthetic ? &TrainConfig::semi_synthetic : &TrainConfig::synthetic;
  return {{"plain", make(Mode::Plain, 0), model::Family::Network},
          {"contrastive", make(Mode::Contrastive, 0), model::Family::Network}};
}

struct EvalOptions {
  /// Standard deviation of the test-time perturbation of T_nC.
  double perturbation_scale = 1.0;
  std::size_t draws = 1;
  std::size_t jobs = 0;
};

/// One (variant, axis point) cell.
struct SweepCell {
  std::string variant;
  double axis_value = 0.0;
  std::vector<SeedMetrics> per_seed;
  std::optional<MetricsReport> report;  // absent when every seed failed
  std::vector<std::string> failures;
};

struct SweepResult {
  std::string axis_name;
  std::vector<double> axis_values;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  /// cells[v][a] for variant v at axis point a.
  std::vector<std::vector<SweepCell>> cells;

  const SweepCell& cell(const std::string& variant, std::size_t axis_index) const {
    for (std::size_t v = 0; v < variants.size(); ++v)
      if (variants[v] == variant) return cells[v][axis_index];
    throw ConfigError("SweepResult: no variant named '" + variant + "'");
  }
};

namespace detail {

inline void check_axis(const std::vector<double>& axis, const char* what) {
  if (axis.empty()) throw ConfigError(std::string(what) + ": empty grid");
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (!(axis[i] > axis[i - 1])) throw ConfigError(std::string(what) + ": grid must be strictly increasing");
}

inline void check_inputs(const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds,
                         const char* what) {
  if (variants.empty()) throw ConfigError(std::string(what) + ": no variants");
  if (seeds.empty()) throw ConfigError(std::string(what) + ": no seeds");
}

enum Stream : std::uint64_t { kOutcomeNoise = 21, kPairs = 22 };

struct Outcome {
  std::optional<SeedMetrics> metrics;
  std::string failure;
};

inline SweepResult assemble(std::string axis_name, const std::vector<double>& axis, const std::vector<Variant>& variants,
                            const std::vector<std::uint64_t>& seeds, const std::vector<Outcome>& outcomes) {
  // outcomes is laid out [variant][axis][seed].
  SweepResult r;
  r.axis_name = std::move(axis_name);
  r.axis_values = axis;
  r.seeds = seeds;
  for (const auto& v : variants) r.variants.push_back(v.name);
  r.cells.assign(variants.size(), std::vector<SweepCell>(axis.size()));
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t a = 0; a < axis.size(); ++a) {
      SweepCell& c = r.cells[v][a];
      c.variant = variants[v].name;
      c.axis_value = axis[a];
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const Outcome& o = outcomes[(v * axis.size() + a) * seeds.size() + s];
        if (o.metrics) {
          c.per_seed.push_back(*o.metrics);
        } else {
          c.failures.push_back("seed " + std::to_string(seeds[s]) + ": " + o.failure);
        }
      }
      if (!c.per_seed.empty()) c.report = aggregate(c.per_seed);
    }
  }
  return r;
}

}  // namespace detail

/// Eval-split MAE and RMSE plus PEHE on non-causal perturbation pairs drawn
/// from a stream keyed by `seed`.
template <typename Model>
SeedMetrics evaluate_model(const Model& m, const scm::Dataset& ds, std::uint64_t seed, const EvalOptions& opts) {
  SeedMetrics sm;
  sm.seed = seed;
  const ErrorMetrics e = mae_rmse(m, ds);
  sm.mae = e.mae;
  sm.rmse = e.rmse;
  nn::Rng pair_rng = nn::Rng(seed).split(detail::kPairs);
  sm.pehe = pehe(m, make_noncausal_pairs(ds, scm::Split::Eval, opts.perturbation_scale, pair_rng, opts.draws));
  return sm;
}

/// Trains `variant` on `ds` with the given seed and reports eval-split MAE,
/// RMSE and PEHE on non-causal perturbation pairs.
inline SeedMetrics train_and_evaluate(const Variant& variant, const scm::Dataset& ds, std::uint64_t seed,
                                      const EvalOptions& opts) {
  model::TrainConfig cfg = variant.config;
  cfg.seed = seed;
  auto result = model::train_family(ds, cfg, variant.family);
  if (result.status != model::TrainStatus::Completed) throw TrainingError(result.message);
  return evaluate_model(result.model, ds, seed, opts);
}

/// Per-seed synthetic data with extra outcome noise of each std in `stds`
/// (added before the split is used for training). Every variant sees the
/// same data at a given (std, seed).
inline SweepResult irreducible_sweep(const std::vector<Variant>& variants, const scm::ScmParams& params,
                                     const std::vector<double>& stds, const std::vector<std::uint64_t>& seeds,
                                     const EvalOptions& opts = {}) {
  detail::check_inputs(variants, seeds, "irreducible_sweep");
  detail::check_axis(stds, "irreducible_sweep");
  for (double s : stds)
    if (s < 0.0) throw ConfigError("irreducible_sweep: noise std must be >= 0");
  params.validate();

  const std::size_t nv = variants.size(), na = stds.size(), ns = seeds.size();
  std::vector<detail::Outcome> outcomes(nv * na * ns);
  parallel_for(outcomes.size(), opts.jobs, [&](std::size_t i) {
    const std::size_t s = i % ns, a = (i / ns) % na, v = i / (ns * na);
    scm::ScmParams p = params;
    p.seed = seeds[s];
    try {
      nn::Rng noise = nn::Rng(seeds[s]).split(detail::kOutcomeNoise);
      const scm::Dataset ds = scm::perturb_outcome_noise(scm::generate_synthetic(p), stds[a], noise);
      outcomes[i].metrics = train_and_evaluate(variants[v], ds, seeds[s], opts);
    } catch (const TrainingError& e) {
      outcomes[i].failure = e.what();
    }
  });
  return detail::assemble("outcome_noise_std", stds, variants, seeds, outcomes);
}

/// Trains each (variant, seed) once on `ds`, then evaluates PEHE at every
/// test-time perturbation scale in `noise_scales`.
inline SweepResult reducible_sweep(const std::vector<Variant>& variants, const scm::Dataset& ds,
                                   const std::vector<double>& noise_scales, const std::vector<std::uint64_t>& seeds,
                                   const EvalOptions& opts = {}) {
  detail::check_inputs(variants, seeds, "reducible_sweep");
  detail::check_axis(noise_scales, "reducible_sweep");
  if (!ds.has_latents()) throw UnsupportedError("reducible_sweep: dataset carries no latent ground truth");

  const std::size_t nv = variants.size(), na = noise_scales.size(), ns = seeds.size();
  std::vector<detail::Outcome> outcomes(nv * na * ns);
  parallel_for(nv * ns, opts.jobs, [&](std::size_t i) {
    const std::size_t s = i % ns, v = i / ns;
    model::TrainConfig cfg = variants[v].config;
    cfg.seed = seeds[s];
    auto fill_failure = [&](const std::string& why) {
      for (std::size_t a = 0; a < na; ++a) outcomes[(v * na + a) * ns + s].failure = why;
    };
    try {
      auto result = model::train_family(ds, cfg, variants[v].family);
      if (result.status != model::TrainStatus::Completed) return fill_failure(result.message);
      for (std::size_t a = 0; a < na; ++a) {
        EvalOptions point = opts;
        point.perturbation_scale = noise_scales[a];
        outcomes[(v * na + a) * ns + s].metrics = evaluate_model(result.model, ds, seeds[s], point);
      }
    } catch (const TrainingError& e) {
      fill_failure(e.what());
    }
  });
  return detail::assemble("noncausal_noise_scale", noise_scales, variants, seeds, outcomes);
}

inline std::vector<std::uint64_t> seed_range(std::size_t count, std::uint64_t first = 0) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = first + i;
  return seeds;
}

inline std::vector<double> default_reducible_grid() { return {0.2, 0.4, 0.6, 0.8, 1.0}; }

}  // namespace contracate::eval
