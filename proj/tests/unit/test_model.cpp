#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "contracate/eval/metrics.hpp"
#include "contracate/model/any_model.hpp"
#include "contracate/model/ols.hpp"
#include "contracate/model/train.hpp"
#include "contracate/nn/gradcheck.hpp"
#include "contracate/scm/generators.hpp"

using namespace contracate;
using namespace contracate::model;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

CateModel small_network(std::size_t dx, std::size_t dt, std::uint64_t seed) {
  CateArchitecture arch;
  arch.dim_x = dx;
  arch.dim_t = dt;
  nn::Rng rng(seed);
  return CateModel::create(arch, rng);
}

bool bitwise_equal(std::vector<nn::Parameter> a, std::vector<nn::Parameter> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value.rows() != b[i].value.rows() || a[i].value.cols() != b[i].value.cols()) return false;
    if (std::memcmp(a[i].value.data(), b[i].value.data(), static_cast<std::size_t>(a[i].value.size()) * sizeof(double)) != 0)
      return false;
  }
  return true;
}

scm::ScmParams linear_params(std::uint64_t seed) {
  scm::ScmParams p;
  p.dim_causal = p.dim_noncausal = 1;
  p.rho = 1.3;
  p.delta = -0.7;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(Predict, ZeroParametersGiveZero) {
  CateModel net = small_network(3, 4, 1);
  for (auto& p : net.parameters()) p.value.setZero();
  EXPECT_EQ(net.predict(vec({1, -2, 3}), vec({4, 5, 6, 7})), 0.0);
  LinearCateModel lin(3, 4);
  EXPECT_EQ(lin.predict(vec({1, -2, 3}), vec({4, 5, 6, 7})), 0.0);
}

TEST(Predict, LinearExample) {
  const LinearCateModel m(vec({1, 0}), vec({0}), 0.0);
  EXPECT_EQ(m.predict(vec({7}), vec({2, 5})), 2.0);
  EXPECT_EQ(m.treatment_representation(vec({2, 5})), vec({2, 0}));
}

TEST(Predict, DimensionMismatchIsConfigError) {
  const CateModel net = small_network(3, 4, 1);
  EXPECT_THROW(net.predict(vec({1, 2}), vec({1, 2, 3, 4})), ConfigError);
  EXPECT_THROW(net.predict(vec({1, 2, 3}), vec({1})), ConfigError);
  const LinearCateModel lin(vec({1, 0}), vec({0}), 0.0);
  EXPECT_THROW(lin.predict(vec({7, 1}), vec({2, 5})), ConfigError);
}

TEST(Predict, BatchMatchesSingle) {
  const CateModel net = small_network(2, 3, 9);
  nn::Rng rng(2);
  Tensor2 x(5, 2), t(5, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  const Eigen::VectorXd batch = net.predict_batch(x, t);
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(batch(i), net.predict(x.row(i).transpose(), t.row(i).transpose()), 1e-12);
  }
}

TEST(Architecture, HeadWidthInvariant) {
  const CateModel net = small_network(4, 6, 3);
  EXPECT_EQ(net.head().in_dim(), net.repr_dim() + net.x_branch().out_dim());
  EXPECT_EQ(net.t_branch().size(), 2u);
  EXPECT_EQ(net.x_branch().size(), 1u);
  EXPECT_EQ(net.head().size(), 3u);
  EXPECT_EQ(net.repr_dim(), 32u);
}

TEST(TreatmentRepresentation, ZeroTBranchGivesZero) {
  CateModel net = small_network(3, 4, 1);
  for (auto& p : net.parameters())
    if (p.name.rfind("t_branch", 0) == 0) p.value.setZero();
  EXPECT_TRUE(net.treatment_representation(vec({1, 2, 3, 4})).isZero(0.0));
}

TEST(Gradients, TripletTermLeavesXBranchUntouched) {
  CateModel net = small_network(3, 4, 5);
  nn::Rng rng(6);
  Tensor2 x(4, 3), t(8, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 3.0 * rng.normal();
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  const std::vector<mining::Triplet> triples = {{0, 4, 5}, {2, 6, 7}};
  TrainConfig cfg;
  cfg.contrastive_weight = 1.0;
  cfg.margin = 100.0;

  net.zero_grad();
  const auto losses = accumulate_gradients(net, x, t, y, triples, cfg, LossTerms::TripletOnly);
  ASSERT_GT(losses.triplet, 0.0);
  double t_norm = 0.0;
  for (auto& p : net.parameters()) {
    if (p.name.rfind("t_branch", 0) == 0) {
      t_norm += p.grad.norm();
    } else {
      EXPECT_TRUE(p.grad.isZero(0.0)) << p.name;
    }
  }
  EXPECT_GT(t_norm, 0.0);
}

// Huber plus weighted triplet loss against central differences, for every
// parameter of a small two-branch network.
TEST(Gradients, FullModelMatchesFiniteDifferences) {
  CateArchitecture arch;
  arch.dim_x = 3;
  arch.dim_t = 4;
  arch.t_hidden = 6;
  arch.repr_dim = 5;
  arch.x_hidden = 4;
  arch.head_hidden = {6, 3};
  nn::Rng rng(77);
  CateModel net = CateModel::create(arch, rng);
  Tensor2 x(5, 3), t(8, 4);
  Eigen::VectorXd y(5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = 3.0 * rng.normal();
  const std::vector<mining::Triplet> triples = {{0, 5, 6}, {2, 7, 1}, {4, 3, 5}};
  TrainConfig cfg = TrainConfig::synthetic(Mode::Contrastive);
  cfg.contrastive_weight = 0.3;
  cfg.margin = 2.0;

  net.zero_grad();
  const auto losses = accumulate_gradients(net, x, t, y, triples, cfg);
  ASSERT_GT(losses.triplet, 0.0);
  auto scalar = [&] {
    CateModel copy = net;
    copy.zero_grad();
    const auto s = accumulate_gradients(copy, x, t, y, triples, cfg);
    return s.huber + cfg.contrastive_weight * s.triplet;
  };
  for (auto& p : net.parameters()) {
    EXPECT_LT(nn::max_relative_error(p.grad, nn::numerical_gradient(scalar, p.value)), 1e-4) << p.name;
  }
}

TEST(Gradients, PlainStepIgnoresTriples) {
  CateModel a = small_network(3, 4, 5);
  CateModel b = a;
  nn::Rng rng(6);
  Tensor2 x(4, 3), t(6, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  TrainConfig cfg;
  a.zero_grad();
  b.zero_grad();
  accumulate_gradients(a, x, t, y, {{0, 4, 5}}, cfg, LossTerms::OutcomeOnly);
  accumulate_gradients(b, x, t.topRows(4), y, {}, cfg);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(pa[i].grad.isApprox(pb[i].grad, 1e-14) || pa[i].grad.isZero(0.0));
}

TEST(Train, ZeroWeightReproducesPlainBitwise) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig plain = TrainConfig::synthetic(Mode::Plain, 3);
  plain.epochs = 15;
  TrainConfig zero = TrainConfig::synthetic(Mode::Contrastive, 3);
  zero.epochs = 15;
  zero.contrastive_weight = 0.0;
  auto a = train(ds, plain);
  auto b = train(ds, zero);
  EXPECT_TRUE(bitwise_equal(a.model.parameters(), b.model.parameters()));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].huber_loss, b.log[i].huber_loss);
  // The term is still reported in the log.
  EXPECT_GT(b.log.back().n_triples, 0u);
}

TEST(Train, DeterministicForSeed) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig c = TrainConfig::synthetic(Mode::Contrastive, 8);
  c.epochs = 10;
  auto a = train(ds, c);
  auto b = train(ds, c);
  EXPECT_TRUE(bitwise_equal(a.model.parameters(), b.model.parameters()));
  c.seed = 9;
  auto d = train(ds, c);
  EXPECT_FALSE(bitwise_equal(a.model.parameters(), d.model.parameters()));
}

TEST(Train, LogRecordsBothTerms) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig c = TrainConfig::synthetic(Mode::Contrastive, 1);
  c.epochs = 5;
  const auto r = train(ds, c);
  ASSERT_EQ(r.log.size(), 5u);
  EXPECT_EQ(r.status, TrainStatus::Completed);
  EXPECT_GT(r.mining.epsilon, 0.0);
  EXPECT_EQ(r.mining.projection.size(), ds.dim_x());
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].epoch, i);
    EXPECT_GT(r.log[i].huber_loss, 0.0);
    EXPECT_GT(r.log[i].n_triples, 0u);
    EXPECT_GE(r.log[i].triplet_loss, 0.0);
  }
}

TEST(Train, MovingAverageOfCombinedLossDecreases) {
  scm::ScmParams p;
  p.y_noise_std = 0.0;
  const scm::Dataset ds = scm::generate_synthetic(p);
  TrainConfig c = TrainConfig::synthetic(Mode::Contrastive, 2);
  c.epochs = 120;
  const auto r = train(ds, c);
  ASSERT_EQ(r.log.size(), c.epochs);
  std::vector<double> combined;
  for (const auto& e : r.log) combined.push_back(e.huber_loss + c.contrastive_weight * e.triplet_loss);
  const std::size_t w = 10;
  std::vector<double> ma;
  for (std::size_t i = 0; i + w <= combined.size(); i += w) {
    double s = 0.0;
    for (std::size_t j = i; j < i + w; ++j) s += combined[j];
    ma.push_back(s / static_cast<double>(w));
  }
  for (std::size_t i = 1; i < ma.size(); ++i) EXPECT_LE(ma[i], ma[i - 1] * 1.05) << "window " << i;
  EXPECT_LT(ma.back(), ma.front());
}

TEST(Train, DivergenceReturnsLastGoodModel) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig c = TrainConfig::synthetic(Mode::Plain, 1);
  c.epochs = 50;
  c.lr = 1e306;
  const auto r = train(ds, c);
  EXPECT_EQ(r.status, TrainStatus::Diverged);
  EXPECT_FALSE(r.message.empty());
  auto params = const_cast<CateModel&>(r.model).parameters();
  for (auto& prm : params) EXPECT_TRUE(prm.value.allFinite()) << prm.name;
}

TEST(Train, InvalidConfigRejected) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(train(ds, c), ConfigError);
  c = TrainConfig{};
  c.margin = -1.0;
  EXPECT_THROW(train(ds, c), ConfigError);
  c = TrainConfig{};
  c.mining.epsilon_quantile = 1.0;
  EXPECT_THROW(train(ds, c), ConfigError);
}

TEST(Train, Presets) {
  EXPECT_DOUBLE_EQ(TrainConfig::synthetic(Mode::Contrastive).contrastive_weight, 0.1);
  EXPECT_DOUBLE_EQ(TrainConfig::synthetic(Mode::Contrastive).margin, 30.0);
  EXPECT_DOUBLE_EQ(TrainConfig::semi_synthetic(Mode::Contrastive).contrastive_weight, 1.0);
  EXPECT_DOUBLE_EQ(TrainConfig::semi_synthetic(Mode::Contrastive).margin, 100.0);
  EXPECT_DOUBLE_EQ(TrainConfig{}.lr, 1e-4);
}

TEST(Train, PlainModelMaeWithinReportedBand) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  const auto r = train(ds, TrainConfig::synthetic(Mode::Plain, 0));
  ASSERT_EQ(r.status, TrainStatus::Completed);
  const auto m = eval::mae_rmse(r.model, ds);
  RecordProperty("eval_mae", std::to_string(m.mae));
  EXPECT_GE(m.mae, 0.3);
  EXPECT_LE(m.mae, 0.9);
}

TEST(Train, LinearFamilyLearnsFromZero) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  TrainConfig c = TrainConfig::synthetic(Mode::Plain, 0);
  c.epochs = 30;
  const auto r = train_linear(ds, c);
  EXPECT_LT(r.log.back().huber_loss, r.log.front().huber_loss);
  EXPECT_GT(r.model.treatment_weights().norm(), 0.0);
}

TEST(AnyModelWrapper, DispatchesAndParses) {
  const AnyModel lin(LinearCateModel(vec({1, 0}), vec({0}), 0.0));
  EXPECT_EQ(lin.family(), Family::Linear);
  EXPECT_EQ(lin.predict(vec({7}), vec({2, 5})), 2.0);
  EXPECT_EQ(parse_family("network"), Family::Network);
  EXPECT_EQ(parse_mode("contrastive"), Mode::Contrastive);
  EXPECT_THROW(parse_family("tree"), ConfigError);
  EXPECT_THROW(parse_mode("both"), ConfigError);
}

TEST(FitOls, NoiselessCausalDesignRecoversCoefficients) {
  scm::ScmParams p = linear_params(1);
  p.y_noise_std = 0.0;
  const scm::Dataset ds = scm::generate_linear_scm(p);
  const auto fit = fit_ols(ds, false);
  EXPECT_FALSE(fit.ridge_fallback);
  EXPECT_NEAR(fit.model.treatment_weights()[0], p.rho, 1e-8);
  EXPECT_EQ(fit.model.treatment_weights()[1], 0.0);
  EXPECT_NEAR(fit.model.covariate_weights()[0], p.delta, 1e-8);
  EXPECT_NEAR(fit.model.bias(), 0.0, 1e-8);
}

TEST(FitOls, CollinearNonCausalTriggersRidge) {
  scm::ScmParams p = linear_params(1);
  p.y_noise_std = 0.0;
  p.noncausal_noise_std = 0.0;
  const scm::Dataset ds = scm::generate_linear_scm(p);
  const auto fit = fit_ols(ds, true);
  EXPECT_TRUE(fit.ridge_fallback);
  EXPECT_LE(fit.reciprocal_condition, kSingularityTolerance);
  // Still a least-squares fit of a noiseless target.
  const auto m = eval::mae_rmse(fit.model, ds, ds.train_indices());
  EXPECT_LT(m.mae, 1e-5);
}

TEST(FitOls, NoisyFiniteSampleGivesNonzeroNonCausalWeight) {
  const scm::ScmParams p = linear_params(7);
  const scm::Dataset ds = scm::generate_linear_scm(p);
  const auto rows = ds.train_indices();
  const auto fit = fit_ols(ds, true);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = ds.samples[rows[i]];
    a.row(static_cast<Eigen::Index>(i)) << s.t[0], s.t[1], s.x[0], 1.0;
    b(static_cast<Eigen::Index>(i)) = s.y;
  }
  const Eigen::VectorXd qr = a.colPivHouseholderQr().solve(b);
  const double w_nc = fit.model.treatment_weights()[1];
  RecordProperty("noncausal_weight", std::to_string(w_nc));
  EXPECT_NEAR(w_nc, qr[1], 1e-9);
  EXPECT_NE(w_nc, 0.0);

  // For a linear model the PEHE under a non-causal shift is |w_nc| times the RMS shift.
  nn::Rng rng(3);
  const auto pairs = eval::make_noncausal_pairs(ds, scm::Split::Eval, 1.0, rng);
  double shift = 0.0;
  for (const auto& pr : pairs) shift += std::pow(pr.perturbed.t[1] - pr.original.t[1], 2);
  shift = std::sqrt(shift / static_cast<double>(pairs.size()));
  const double pehe = eval::pehe(fit.model, pairs);
  EXPECT_GT(pehe, 0.0);
  EXPECT_NEAR(pehe, std::abs(w_nc) * shift, 1e-9);
}

TEST(FitOls, CausalDesignNeedsLatents) {
  scm::Dataset ds = scm::generate_linear_scm(linear_params(1));
  for (auto& s : ds.samples) s.t_causal.reset();
  EXPECT_THROW(fit_ols(ds, false), UnsupportedError);
  EXPECT_NO_THROW(fit_ols(ds, true));
}
