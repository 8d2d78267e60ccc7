#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/mining/bucket_index.hpp"
#include "contracate/mining/triplets.hpp"
#include "contracate/model/cate_model.hpp"
#include "contracate/model/linear_model.hpp"
#include "contracate/model/ols.hpp"
#include "contracate/nn/adam.hpp"
#include "contracate/nn/losses.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/scm/dataset.hpp"

namespace contracate::model {

enum class Mode { Plain, Contrastive };

inline const char* to_string(Mode m) { return m == Mode::Plain ? "plain" : "contrastive"; }

struct MiningConfig {
  mining::CovariateMap covariate_map = mining::CovariateMap::OutcomeProjection;
  /// Used by CovariateMap::LeadingDims.
  std::size_t leading_dims = 2;
  std::size_t buckets_per_dim = 20;
  double epsilon_quantile = 0.1;
  /// Fixed outcome threshold; overrides epsilon_quantile when set.
  std::optional<double> epsilon;
  std::size_t per_anchor = 1;
  bool remine_each_epoch = true;
};

struct TrainConfig {
  Mode mode = Mode::Plain;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double huber_delta = 1.0;
  double contrastive_weight = 0.1;
  double margin = 30.0;
  std::uint64_t seed = 0;
  MiningConfig mining;
  CateArchitecture architecture;  // dim_x / dim_t are taken from the data

  /// Hyperparameters for the fully synthetic benchmark.
  static TrainConfig synthetic(Mode mode, std::uint64_t seed = 0) {
    TrainConfig c;
    c.mode = mode;
    c.seed = seed;
    c.contrastive_weight = 0.1;
    c.margin = 30.0;
    return c;
  }

  /// Hyperparameters for the semi-synthetic (augmented real-data) benchmarks.
  static TrainConfig semi_synthetic(Mode mode, std::uint64_t seed = 0) {
    TrainConfig c = synthetic(mode, seed);
    c.contrastive_weight = 1.0;
    c.margin = 100.0;
    return c;
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("TrainConfig.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig.batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("TrainConfig.lr must be > 0");
    if (!(huber_delta > 0.0)) throw ConfigError("TrainConfig.huber_delta must be > 0");
    if (!(contrastive_weight >= 0.0)) throw ConfigError("TrainConfig.contrastive_weight must be >= 0");
    if (!(margin > 0.0)) throw ConfigError("TrainConfig.margin must be > 0");
    if (mining.buckets_per_dim < 1) throw ConfigError("TrainConfig.mining.buckets_per_dim must be >= 1");
    if (mining.leading_dims < 1) throw ConfigError("TrainConfig.mining.leading_dims must be >= 1");
    if (!(mining.epsilon_quantile > 0.0 && mining.epsilon_quantile < 1.0)) {
      throw ConfigError("TrainConfig.mining.epsilon_quantile must lie in (0, 1)");
    }
    if (mining.epsilon && !(*mining.epsilon > 0.0)) throw ConfigError("TrainConfig.mining.epsilon must be > 0");
    if (mining.per_anchor < 1) throw ConfigError("TrainConfig.mining.per_anchor must be >= 1");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double huber_loss = 0.0;
  double triplet_loss = 0.0;
  std::size_t n_triples = 0;
};

enum class TrainStatus { Completed, Diverged };

/// Quantities derived while preparing pair mining; archived in manifests.
struct MiningSummary {
  double epsilon = 0.0;
  std::vector<std::vector<double>> bucket_edges;
  std::vector<double> projection;  // covariate weights of the learned g, if any
  std::size_t bucket_count = 0;
  std::vector<std::string> warnings;
};

template <typename Model>
struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  MiningSummary mining;
};

namespace detail {

enum Stream : std::uint64_t { kInit = 11, kShuffle = 12, kMining = 13, kEpsilon = 14 };

struct PreparedMining {
  mining::BucketIndex index;
  std::vector<double> outcomes;  // aligned with index rows (= train rows)
  MiningSummary summary;
  bool enabled = false;
};

inline Tensor2 covariate_representation(const MiningConfig& config, const scm::Dataset& ds,
                                        const std::vector<std::size_t>& rows, MiningSummary& summary) {
  const Tensor2 x = scm::covariate_matrix(ds, rows);
  if (config.covariate_map == mining::CovariateMap::LeadingDims) {
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(config.leading_dims), x.cols());
    return x.leftCols(k);
  }
  const OlsFit fit = fit_ols(ds, true, rows);
  const Eigen::VectorXd w = fit.model.covariate_weights();
  summary.projection.assign(w.data(), w.data() + w.size());
  return Tensor2(x * w);
}

inline PreparedMining prepare_mining(const TrainConfig& config, const scm::Dataset& ds,
                                     const std::vector<std::size_t>& rows) {
  PreparedMining out;
  const Tensor2 g = covariate_representation(config.mining, ds, rows, out.summary);
  out.index = mining::build_index(g, config.mining.buckets_per_dim);
  out.outcomes = scm::outcomes(ds, rows);
  out.summary.bucket_edges = out.index.bucket_edges;
  out.summary.bucket_count = out.index.bucket_count();
  out.summary.warnings = out.index.warnings;
  if (config.mining.epsilon) {
    out.summary.epsilon = *config.mining.epsilon;
  } else {
    nn::Rng rng = nn::Rng(config.seed).split(kEpsilon);
    out.summary.epsilon = mining::set_epsilon_by_quantile(out.index, out.outcomes, config.mining.epsilon_quantile, rng);
  }
  out.enabled = out.summary.epsilon > 0.0;
  if (!out.enabled) out.summary.warnings.push_back("pair mining disabled: outcome threshold is 0 (degenerate outcomes)");
  return out;
}

}  // namespace detail

/// Which loss terms contribute gradients in a step.
enum class LossTerms { Both, OutcomeOnly, TripletOnly };

struct StepLosses {
  double huber = 0.0;
  double triplet = 0.0;
  std::size_t triples = 0;
};

/// One minibatch worth of gradients, accumulated into the model's gradient
/// buffers (the caller zeroes them). `triples` index rows of `t_extra`:
/// anchor indexes the first x.rows() rows of the batch, positive/negative
/// index rows of `t_extra` stacked below it.
template <typename Model>
StepLosses accumulate_gradients(Model& model, const Tensor2& x, const Tensor2& t, const Eigen::VectorXd& y,
                                const std::vector<mining::Triplet>& triples, const TrainConfig& config,
                                LossTerms terms = LossTerms::Both) {
  const Eigen::Index b = x.rows();
  const bool use_triplets = !triples.empty() && config.contrastive_weight > 0.0 && terms != LossTerms::OutcomeOnly;

  Tensor2 t_all;
  const auto k = static_cast<Eigen::Index>(triples.size());
  if (use_triplets) {
    // Rows: [batch; positives; negatives]. mining::Triplet fields here are
    // positions: anchor within the batch, positive/negative within t.
    t_all.resize(b + 2 * k, t.cols());
    t_all.topRows(b) = t.topRows(b);
    for (Eigen::Index i = 0; i < k; ++i) {
      t_all.row(b + i) = t.row(static_cast<Eigen::Index>(triples[static_cast<std::size_t>(i)].positive));
      t_all.row(b + k + i) = t.row(static_cast<Eigen::Index>(triples[static_cast<std::size_t>(i)].negative));
    }
  } else {
    t_all = t.topRows(b);
  }

  Tensor2 repr;
  const Eigen::VectorXd pred = model.forward_train(x, t_all, repr);
  StepLosses losses;
  const auto huber = nn::huber_loss(Tensor2(pred), Tensor2(y), config.huber_delta);
  losses.huber = huber.value;
  Eigen::VectorXd grad_pred = huber.grad.col(0);
  if (terms == LossTerms::TripletOnly) grad_pred.setZero();

  Tensor2 grad_repr = Tensor2::Zero(repr.rows(), repr.cols());
  if (use_triplets) {
    Tensor2 anchors(k, repr.cols());
    for (Eigen::Index i = 0; i < k; ++i) anchors.row(i) = repr.row(static_cast<Eigen::Index>(triples[static_cast<std::size_t>(i)].anchor));
    const auto tl = nn::triplet_loss(anchors, repr.middleRows(b, k), repr.middleRows(b + k, k), config.margin);
    losses.triplet = tl.value;
    losses.triples = triples.size();
    const double w = config.contrastive_weight;
    for (Eigen::Index i = 0; i < k; ++i) {
      grad_repr.row(static_cast<Eigen::Index>(triples[static_cast<std::size_t>(i)].anchor)) += w * tl.grad_anchor.row(i);
    }
    grad_repr.middleRows(b, k) = w * tl.grad_positive;
    grad_repr.middleRows(b + k, k) = w * tl.grad_negative;
  }
  model.backward_train(grad_pred, grad_repr);
  return losses;
}

namespace detail {

template <typename Model>
double triplet_value(const Model& model, const Tensor2& t_train, const mining::TripletBatch& batch, double margin) {
  if (batch.empty()) return 0.0;
  const auto k = static_cast<Eigen::Index>(batch.size());
  Tensor2 a(k, t_train.cols()), p(k, t_train.cols()), n(k, t_train.cols());
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& tr = batch.triples[static_cast<std::size_t>(i)];
    a.row(i) = t_train.row(static_cast<Eigen::Index>(tr.anchor));
    p.row(i) = t_train.row(static_cast<Eigen::Index>(tr.positive));
    n.row(i) = t_train.row(static_cast<Eigen::Index>(tr.negative));
  }
  return nn::triplet_loss(model.treatment_representation_batch(a), model.treatment_representation_batch(p),
                          model.treatment_representation_batch(n), margin)
      .value;
}

/// Shared optimization loop for both model families.
template <typename Model>
TrainResult<Model> fit(Model model, const scm::Dataset& ds, const TrainConfig& config) {
  config.validate();
  const auto rows = ds.train_indices();
  if (rows.empty()) throw ConfigError("train: dataset has no training rows");

  TrainResult<Model> result;
  const Tensor2 x_train = scm::covariate_matrix(ds, rows);
  const Tensor2 t_train = scm::treatment_matrix(ds, rows);
  const auto y_vec = scm::outcomes(ds, rows);
  const Eigen::VectorXd y_train = Eigen::Map<const Eigen::VectorXd>(y_vec.data(), static_cast<Eigen::Index>(y_vec.size()));

  const bool contrastive = config.mode == Mode::Contrastive;
  PreparedMining prepared;
  if (contrastive) {
    prepared = prepare_mining(config, ds, rows);
    result.mining = prepared.summary;
  }

  nn::Rng shuffle_rng = nn::Rng(config.seed).split(kShuffle);
  nn::Rng mining_rng = nn::Rng(config.seed).split(kMining);
  nn::Adam adam(nn::AdamConfig{config.lr});
  auto params = model.parameters();

  const std::size_t n = rows.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  mining::TripletBatch triplets;
  Model last_good = model;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (contrastive && prepared.enabled && (epoch == 0 || config.mining.remine_each_epoch)) {
      triplets = mining::mine_triplets(prepared.index, prepared.outcomes, prepared.summary.epsilon,
                                       config.mining.per_anchor, mining_rng);
      if (epoch == 0) {
        for (const auto& w : triplets.warnings) result.mining.warnings.push_back(w);
      }
    }
    // Triples grouped by anchor, for per-batch lookup.
    std::unordered_map<std::size_t, std::vector<std::size_t>> by_anchor;
    for (std::size_t i = 0; i < triplets.size(); ++i) by_anchor[triplets.triples[i].anchor].push_back(i);

    shuffle_rng.shuffle(order.begin(), order.end());
    double huber_sum = 0.0;
    double triplet_sum = 0.0;
    std::size_t triplet_count = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < n && !diverged; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);

      std::vector<mining::Triplet> local;
      std::vector<std::size_t> extra_rows;
      if (config.contrastive_weight > 0.0 && !triplets.empty()) {
        for (std::size_t pos = start; pos < stop; ++pos) {
          const auto it = by_anchor.find(order[pos]);
          if (it == by_anchor.end()) continue;
          for (auto ti : it->second) {
            const auto& tr = triplets.triples[ti];
            local.push_back({pos - start, 0, 0});
            extra_rows.push_back(tr.positive);
            extra_rows.push_back(tr.negative);
          }
        }
      }
      const auto k = static_cast<Eigen::Index>(local.size());
      Tensor2 xb(b, x_train.cols());
      Tensor2 tb(b + 2 * k, t_train.cols());
      Eigen::VectorXd yb(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto r = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]);
        xb.row(i) = x_train.row(r);
        tb.row(i) = t_train.row(r);
        yb(i) = y_train(r);
      }
      for (Eigen::Index i = 0; i < k; ++i) {
        tb.row(b + 2 * i) = t_train.row(static_cast<Eigen::Index>(extra_rows[static_cast<std::size_t>(2 * i)]));
        tb.row(b + 2 * i + 1) = t_train.row(static_cast<Eigen::Index>(extra_rows[static_cast<std::size_t>(2 * i + 1)]));
        local[static_cast<std::size_t>(i)].positive = static_cast<std::size_t>(b + 2 * i);
        local[static_cast<std::size_t>(i)].negative = static_cast<std::size_t>(b + 2 * i + 1);
      }

      model.zero_grad();
      const StepLosses losses = accumulate_gradients(model, xb, tb, yb, local, config);
      if (!std::isfinite(losses.huber) || !std::isfinite(losses.triplet)) {
        diverged = true;
        break;
      }
      try {
        adam.step(params);
      } catch (const TrainingError& e) {
        result.message = e.what();
        diverged = true;
        break;
      }
      huber_sum += losses.huber * static_cast<double>(b);
      triplet_sum += losses.triplet * static_cast<double>(losses.triples);
      triplet_count += losses.triples;
    }
    if (diverged) {
      result.status = TrainStatus::Diverged;
      if (result.message.empty()) result.message = "non-finite loss at epoch " + std::to_string(epoch);
      result.model = std::move(last_good);
      return result;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.huber_loss = huber_sum / static_cast<double>(n);
    if (triplet_count > 0) {
      entry.triplet_loss = triplet_sum / static_cast<double>(triplet_count);
    } else if (contrastive && !triplets.empty()) {
      // Weight 0: the term is reported but never differentiated.
      entry.triplet_loss = triplet_value(model, t_train, triplets, config.margin);
    }
    entry.n_triples = triplets.size();
    result.log.push_back(entry);
    last_good = model;
  }
  if (contrastive && triplets.empty()) {
    result.mining.warnings.push_back("no triples were mined; the contrastive term was skipped");
  }
  result.model = std::move(model);
  return result;
}

}  // namespace detail

inline CateArchitecture resolve_architecture(const TrainConfig& config, const scm::Dataset& ds) {
  CateArchitecture arch = config.architecture;
  arch.dim_x = ds.dim_x();
  arch.dim_t = ds.dim_t();
  return arch;
}

/// Trains the two-branch network with Huber loss plus, in contrastive mode,
/// the weighted triplet loss on h_t.
inline TrainResult<CateModel> train(const scm::Dataset& ds, const TrainConfig& config) {
  nn::Rng init = nn::Rng(config.seed).split(detail::kInit);
  CateModel model = CateModel::create(resolve_architecture(config, ds), init);
  return detail::fit(std::move(model), ds, config);
}

/// Same objective for the linear family, starting from zero weights.
inline TrainResult<LinearCateModel> train_linear(const scm::Dataset& ds, const TrainConfig& config) {
  return detail::fit(LinearCateModel(ds.dim_x(), ds.dim_t()), ds, config);
}

}  // namespace contracate::model
