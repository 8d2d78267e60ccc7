#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

#include "contracate/error.hpp"

namespace contracate::nn {

/// Dense row-major matrix of doubles. Rows are batch entries, columns are
/// features, so one Tensor2 holds a whole minibatch of activations.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

}  // namespace contracate::nn
