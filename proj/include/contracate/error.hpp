#pragma once

#include <stdexcept>
#include <string>

namespace contracate {

/// Base of every error the library throws. The CLI maps the concrete type to
/// a process exit code with exit_code().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (shapes, hyperparameters, thresholds).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An object was used out of order, e.g. backward() before forward().
class StateError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure during optimization (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: missing files, malformed content.
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : DataError(what + " (row " + std::to_string(row) + ", column " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Corrupt or truncated snapshot files.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

/// Snapshot written by an incompatible format version.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// The requested oracle or operator is not defined for this data provenance.
class UnsupportedError : public DataError {
 public:
  using DataError::DataError;
};

namespace exit_codes {
inline constexpr int kSuccess = 0;
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kNumeric = 4;
}  // namespace exit_codes

inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return exit_codes::kConfig;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return exit_codes::kData;
  if (dynamic_cast<const TrainingError*>(&e) != nullptr) return exit_codes::kNumeric;
  if (dynamic_cast<const StateError*>(&e) != nullptr) return exit_codes::kNumeric;
  return exit_codes::kNumeric;
}

}  // namespace contracate
