#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace glamor {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (norm spec, model config, loss config, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input that has no well-defined result, e.g. normalizing a zero vector.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

  /// Same error with `prefix` (typically a file name) in front of the message.
  static DataError prefixed(const DataError& e, const std::string& prefix) {
    return DataError(Raw{}, prefix + ": " + e.what(), e.line_);
  }

 private:
  struct Raw {};
  DataError(Raw, const std::string& what, std::size_t line) : Error(what), line_(line) {}

  std::size_t line_;
};

/// Batch violates the batch-hard mining preconditions.
class MiningError : public Error {
 public:
  MiningError(const std::string& what, std::int64_t identity) : Error(what), identity_(identity) {}

  std::int64_t identity() const noexcept { return identity_; }

 private:
  std::int64_t identity_;
};

}  // namespace glamor
