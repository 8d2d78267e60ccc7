#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "contracate/error.hpp"
#include "contracate/nn/tensor.hpp"

namespace contracate::mining {

using nn::Tensor2;

/// Quantile bucketing of a covariate representation g(X).
///
/// Each output dimension of g is cut at equal-frequency points; a sample's
/// bucket is the tuple of its per-dimension bins. Two samples count as
/// "close in g(X)" when they share a bucket, so the bucket width plays the
/// role of the covariate threshold.
struct BucketIndex {
  /// bucket_edges[k] are the sorted cut points of dimension k; a value v
  /// falls in bin #{edges <= v}.
  std::vector<std::vector<double>> bucket_edges;
  /// bucket_of[i] is the bucket of row i of the g-matrix.
  std::vector<std::size_t> bucket_of;
  /// members[b] lists rows in bucket b in increasing order.
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::string> warnings;

  std::size_t bucket_count() const { return members.size(); }
  std::size_t sample_count() const { return bucket_of.size(); }
};

namespace detail {

inline std::vector<double> quantile_edges(std::vector<double> values, std::size_t buckets) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  const std::size_t n = values.size();
  for (std::size_t j = 1; j < buckets; ++j) {
    const double edge = values[(j * n) / buckets];
    // Ties can make consecutive cuts coincide; an empty bin is dropped.
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

inline std::size_t bin_of(const std::vector<double>& edges, double v) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

}  // namespace detail

/// Builds the index over the rows of `g_values` (one row per sample, one
/// column per dimension of g).
inline BucketIndex build_index(const Tensor2& g_values, std::size_t buckets_per_dim) {
  if (buckets_per_dim < 1) throw ConfigError("build_index: buckets_per_dim must be >= 1");
  const auto n = static_cast<std::size_t>(g_values.rows());
  const auto dims = static_cast<std::size_t>(g_values.cols());
  if (n == 0) throw ConfigError("build_index: no samples");

  BucketIndex index;
  std::size_t buckets = buckets_per_dim;
  if (n < buckets) {
    index.warnings.push_back("build_index: " + std::to_string(n) + " samples for " + std::to_string(buckets) +
                             " buckets per dimension; using " + std::to_string(n));
    buckets = n;
  }

  std::vector<std::vector<std::size_t>> bins(n, std::vector<std::size_t>(dims, 0));
  for (std::size_t k = 0; k < dims; ++k) {
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = g_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    index.bucket_edges.push_back(detail::quantile_edges(column, buckets));
    for (std::size_t i = 0; i < n; ++i) bins[i][k] = detail::bin_of(index.bucket_edges.back(), column[i]);
  }

  // Bucket ids follow the lexicographic order of the bin tuples.
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < n; ++i) grouped[bins[i]].push_back(i);
  index.bucket_of.assign(n, 0);
  for (auto& [key, rows] : grouped) {
    const std::size_t id = index.members.size();
    for (auto r : rows) index.bucket_of[r] = id;
    index.members.push_back(std::move(rows));
  }
  return index;
}

/// Covariate representation g(.) used for bucketing.
enum class CovariateMap {
  /// Identity on the leading `dims` covariates.
  LeadingDims,
  /// One-dimensional learned projection: the covariate weights of a
  /// least-squares fit of y on (t, x).
  OutcomeProjection,
};

}  // namespace contracate::mining
