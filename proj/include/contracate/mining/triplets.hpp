#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/mining/bucket_index.hpp"
#include "contracate/nn/rng.hpp"

namespace contracate::mining {

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Anchor/positive/negative row triples. Every triple shares one bucket,
/// |y_a - y_p| <= epsilon and |y_a - y_n| > epsilon.
struct TripletBatch {
  std::vector<Triplet> triples;
  double epsilon = 0.0;
  std::vector<std::string> warnings;

  bool empty() const { return triples.empty(); }
  std::size_t size() const { return triples.size(); }
};

/// Linear-interpolation quantile (the usual "type 7" definition).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Absolute outcome gaps |y_i - y_j| over within-bucket pairs i < j. When
/// there are more than `max_pairs` such pairs, `max_pairs` of them are drawn
/// uniformly (with replacement) instead.
inline std::vector<double> within_bucket_gaps(const BucketIndex& index, std::span<const double> outcomes,
                                              nn::Rng& rng, std::size_t max_pairs = 200000) {
  std::size_t total = 0;
  for (const auto& m : index.members) total += m.size() * (m.size() - (m.empty() ? 0 : 1)) / 2;
  std::vector<double> gaps;
  if (total <= max_pairs) {
    gaps.reserve(total);
    for (const auto& m : index.members)
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b) gaps.push_back(std::abs(outcomes[m[a]] - outcomes[m[b]]));
    return gaps;
  }
  // Bucket chosen proportionally to its pair count, then a uniform pair.
  std::vector<std::size_t> cumulative;
  std::size_t running = 0;
  for (const auto& m : index.members) {
    running += m.size() * (m.size() - (m.empty() ? 0 : 1)) / 2;
    cumulative.push_back(running);
  }
  gaps.reserve(max_pairs);
  for (std::size_t k = 0; k < max_pairs; ++k) {
    const std::size_t r = rng.index(running);
    const auto b = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) -
                                            cumulative.begin());
    const auto& m = index.members[b];
    const std::size_t i = rng.index(m.size());
    std::size_t j = rng.index(m.size() - 1);
    if (j >= i) ++j;
    gaps.push_back(std::abs(outcomes[m[i]] - outcomes[m[j]]));
  }
  return gaps;
}

/// Outcome threshold set to the q-quantile of within-bucket outcome gaps.
/// Returns 0 (the "mining disabled" sentinel) when every gap is zero or no
/// bucket holds two samples.
inline double set_epsilon_by_quantile(const BucketIndex& index, std::span<const double> outcomes, double q,
                                      nn::Rng& rng) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("set_epsilon_by_quantile: q must lie in (0, 1)");
  if (outcomes.size() != index.sample_count()) {
    throw ConfigError("set_epsilon_by_quantile: outcome count does not match the index");
  }
  const auto gaps = within_bucket_gaps(index, outcomes, rng);
  if (gaps.empty()) return 0.0;
  const double eps = quantile(gaps, q);
  return eps > 0.0 ? eps : 0.0;
}

/// For every anchor row, draws up to `per_anchor` distinct (positive,
/// negative) combinations uniformly from its bucket-mates. Anchors lacking
/// either a positive or a negative contribute nothing.
inline TripletBatch mine_triplets(const BucketIndex& index, std::span<const double> outcomes, double epsilon,
                                  std::size_t per_anchor, nn::Rng& rng) {
  if (!(epsilon > 0.0)) throw ConfigError("mine_triplets: epsilon must be > 0");
  if (per_anchor < 1) throw ConfigError("mine_triplets: per_anchor must be >= 1");
  if (outcomes.size() != index.sample_count()) throw ConfigError("mine_triplets: outcome count does not match the index");

  TripletBatch batch;
  batch.epsilon = epsilon;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t a = 0; a < index.sample_count(); ++a) {
    positives.clear();
    negatives.clear();
    for (auto j : index.members[index.bucket_of[a]]) {
      if (j == a) continue;
      (std::abs(outcomes[a] - outcomes[j]) <= epsilon ? positives : negatives).push_back(j);
    }
    if (positives.empty() || negatives.empty()) continue;

    const std::size_t combos = positives.size() * negatives.size();
    const std::size_t want = std::min(per_anchor, combos);
    if (want == 1) {
      const std::size_t p = positives[rng.index(positives.size())];
      const std::size_t n = negatives[rng.index(negatives.size())];
      batch.triples.push_back({a, p, n});
      continue;
    }
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    while (chosen.size() < want) {
      const std::size_t p = positives[rng.index(positives.size())];
      const std::size_t n = negatives[rng.index(negatives.size())];
      if (chosen.emplace(p, n).second) batch.triples.push_back({a, p, n});
    }
  }
  if (batch.triples.empty()) {
    batch.warnings.push_back("mine_triplets: no valid triples (check epsilon and bucket granularity)");
  }
  return batch;
}

/// Re-checks the bucket and threshold constraints of every triple.
inline bool satisfies_constraints(const TripletBatch& batch, const BucketIndex& index, std::span<const double> outcomes) {
  for (const auto& tr : batch.triples) {
    if (tr.anchor == tr.positive || tr.anchor == tr.negative || tr.positive == tr.negative) return false;
    const auto b = index.bucket_of.at(tr.anchor);
    if (index.bucket_of.at(tr.positive) != b || index.bucket_of.at(tr.negative) != b) return false;
    if (!(std::abs(outcomes[tr.anchor] - outcomes[tr.positive]) <= batch.epsilon)) return false;
    if (!(std::abs(outcomes[tr.anchor] - outcomes[tr.negative]) > batch.epsilon)) return false;
  }
  return true;
}

}  // namespace contracate::mining
