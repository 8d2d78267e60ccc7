#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "contracate/mining/bucket_index.hpp"
#include "contracate/mining/triplets.hpp"
#include "contracate/model/ols.hpp"
#include "contracate/scm/generators.hpp"

using namespace contracate;
using namespace contracate::mining;

namespace {

Tensor2 column(std::vector<double> v) {
  Tensor2 t(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = v[i];
  return t;
}

// g = covariate weights of the least-squares outcome fit, as used in training.
Tensor2 outcome_projection(const scm::Dataset& ds, const std::vector<std::size_t>& rows) {
  const auto fit = model::fit_ols(ds, true, rows);
  return scm::covariate_matrix(ds, rows) * fit.model.covariate_weights();
}

}  // namespace

TEST(BuildIndex, SingleBucket) {
  const BucketIndex idx = build_index(column({5, 1, 3, 2, 4}), 1);
  ASSERT_EQ(idx.bucket_count(), 1u);
  EXPECT_EQ(idx.members[0].size(), 5u);
}

TEST(BuildIndex, MedianSplit) {
  const BucketIndex idx = build_index(column({1, 2, 3, 4}), 2);
  ASSERT_EQ(idx.bucket_count(), 2u);
  EXPECT_EQ(idx.members[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(idx.members[1], (std::vector<std::size_t>{2, 3}));
}

TEST(BuildIndex, BucketMatesAreWithinBucketRange) {
  nn::Rng rng(1);
  Tensor2 g(300, 2);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const BucketIndex idx = build_index(g, 4);
  std::size_t total = 0;
  for (const auto& m : idx.members) {
    total += m.size();
    for (Eigen::Index k = 0; k < 2; ++k) {
      double lo = 1e300, hi = -1e300;
      for (auto i : m) {
        lo = std::min(lo, g(static_cast<Eigen::Index>(i), k));
        hi = std::max(hi, g(static_cast<Eigen::Index>(i), k));
      }
      for (auto i : m)
        for (auto j : m) EXPECT_LE(std::abs(g(static_cast<Eigen::Index>(i), k) - g(static_cast<Eigen::Index>(j), k)), hi - lo);
    }
  }
  EXPECT_EQ(total, 300u);
  EXPECT_EQ(idx.bucket_count(), 16u);
}

TEST(BuildIndex, FewerSamplesThanBucketsWarns) {
  const BucketIndex idx = build_index(column({1, 2, 3}), 10);
  EXPECT_FALSE(idx.warnings.empty());
  EXPECT_EQ(idx.bucket_count(), 3u);
}

TEST(BuildIndex, RejectsZeroBuckets) { EXPECT_THROW(build_index(column({1, 2}), 0), ConfigError); }

TEST(MineTriplets, ThresholdArithmetic) {
  const BucketIndex idx = build_index(column({0, 0, 0}), 1);
  const std::vector<double> y = {0.0, 0.05, 5.0};
  nn::Rng rng(0);
  const TripletBatch b = mine_triplets(idx, y, 0.1, 1, rng);
  EXPECT_NE(std::find(b.triples.begin(), b.triples.end(), Triplet{0, 1, 2}), b.triples.end());
  EXPECT_TRUE(satisfies_constraints(b, idx, y));
}

TEST(MineTriplets, EpsilonAboveRangeGivesEmptyBatch) {
  const BucketIndex idx = build_index(column({0, 0, 0}), 1);
  const std::vector<double> y = {0.0, 0.05, 5.0};
  nn::Rng rng(0);
  const TripletBatch b = mine_triplets(idx, y, 10.0, 1, rng);
  EXPECT_TRUE(b.empty());
  EXPECT_FALSE(b.warnings.empty());
}

TEST(MineTriplets, RejectsNonPositiveEpsilon) {
  const BucketIndex idx = build_index(column({0, 0}), 1);
  nn::Rng rng(0);
  EXPECT_THROW(mine_triplets(idx, std::vector<double>{0, 1}, 0.0, 1, rng), ConfigError);
}

TEST(MineTriplets, SoundAndDeterministicOnGeneratedData) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  const auto rows = ds.train_indices();
  const auto y = scm::outcomes(ds, rows);
  const BucketIndex idx = build_index(outcome_projection(ds, rows), 20);
  nn::Rng r1(5), r2(5);
  const TripletBatch a = mine_triplets(idx, y, 0.5, 3, r1);
  const TripletBatch b = mine_triplets(idx, y, 0.5, 3, r2);
  EXPECT_FALSE(a.empty());
  EXPECT_TRUE(satisfies_constraints(a, idx, y));
  EXPECT_EQ(a.triples, b.triples);
  // At most per_anchor distinct triples per anchor.
  std::map<std::size_t, std::set<std::pair<std::size_t, std::size_t>>> per;
  for (const auto& t : a.triples) EXPECT_TRUE(per[t.anchor].emplace(t.positive, t.negative).second);
  for (const auto& [anchor, s] : per) EXPECT_LE(s.size(), 3u);
}

// Positives share the causal latents more closely than negatives from the
// same anchors, on noiseless data.
class CausalAlignment : public ::testing::TestWithParam<int> {};

TEST_P(CausalAlignment, PositivesCloserInCausalLatents) {
  scm::ScmParams p;
  p.y_noise_std = 0.0;
  const scm::Dataset ds = scm::generate_synthetic(p);
  const auto rows = ds.train_indices();
  const auto y = scm::outcomes(ds, rows);
  BucketIndex idx;
  if (GetParam() == 0) {
    idx = build_index(scm::covariate_matrix(ds, rows).leftCols(2), 3);
  } else {
    idx = build_index(outcome_projection(ds, rows), 20);
  }
  nn::Rng erng(1), mrng(2);
  const double eps = set_epsilon_by_quantile(idx, y, 0.1, erng);
  const TripletBatch b = mine_triplets(idx, y, eps, 1, mrng);
  ASSERT_FALSE(b.empty());
  double pos = 0, neg = 0;
  for (const auto& t : b.triples) {
    const auto& a = ds.samples[rows[t.anchor]];
    pos += (*a.t_causal - *ds.samples[rows[t.positive]].t_causal).norm();
    neg += (*a.t_causal - *ds.samples[rows[t.negative]].t_causal).norm();
  }
  pos /= static_cast<double>(b.size());
  neg /= static_cast<double>(b.size());
  RecordProperty("mean_dtc_positive", std::to_string(pos));
  RecordProperty("mean_dtc_negative", std::to_string(neg));
  EXPECT_LT(pos, neg);
}

INSTANTIATE_TEST_SUITE_P(Maps, CausalAlignment, ::testing::Values(0, 1));

TEST(Epsilon, AllOutcomesEqualGivesSentinel) {
  const BucketIndex idx = build_index(column({1, 2, 3, 4}), 1);
  nn::Rng rng(0);
  EXPECT_EQ(set_epsilon_by_quantile(idx, std::vector<double>{2, 2, 2, 2}, 0.1, rng), 0.0);
}

TEST(Epsilon, MedianOfGaps) {
  // Gaps of {0, 1, 3} are {1, 3, 2}.
  const BucketIndex idx = build_index(column({0, 0, 0}), 1);
  nn::Rng rng(0);
  EXPECT_DOUBLE_EQ(set_epsilon_by_quantile(idx, std::vector<double>{0, 1, 3}, 0.5, rng), 2.0);
}

TEST(Epsilon, RejectsOutOfRangeQuantile) {
  const BucketIndex idx = build_index(column({0, 0, 0}), 1);
  nn::Rng rng(0);
  EXPECT_THROW(set_epsilon_by_quantile(idx, std::vector<double>{0, 1, 3}, 1.0, rng), ConfigError);
}

TEST(Epsilon, DefaultQuantileOnSyntheticMatchesBruteForce) {
  const scm::Dataset ds = scm::generate_synthetic(scm::ScmParams{});
  const auto rows = ds.train_indices();
  const auto y = scm::outcomes(ds, rows);
  const BucketIndex idx = build_index(outcome_projection(ds, rows), 20);
  nn::Rng rng(0);
  const double eps = set_epsilon_by_quantile(idx, y, 0.1, rng);

  // Brute force over all same-bucket pairs, located via bucket_of only.
  std::vector<double> gaps;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      if (idx.bucket_of[i] == idx.bucket_of[j]) gaps.push_back(std::abs(y[i] - y[j]));
  std::sort(gaps.begin(), gaps.end());
  const double h = 0.1 * static_cast<double>(gaps.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double expected = gaps[lo] + (h - static_cast<double>(lo)) * (gaps[lo + 1] - gaps[lo]);
  RecordProperty("epsilon", std::to_string(eps));
  EXPECT_DOUBLE_EQ(eps, expected);
  EXPECT_GT(eps, 0.0);
}
