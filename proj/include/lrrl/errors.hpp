#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lrrl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates a documented precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input matrix is rank deficient; `column()` is the first dependent column.
class DegenerateInputError : public Error {
 public:
  DegenerateInputError(std::size_t column, const std::string& what)
      : Error(what + " (column " + std::to_string(column) + ")"), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// An iterative estimator produced non-finite values.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Loss of positive definiteness or similar floating-point breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Bandit environment cannot serve a request (e.g. an empty digit pool).
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input; `offset()` is the byte position of the problem.
class ParseError : public Error {
 public:
  ParseError(std::uint64_t offset, const std::string& what)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrrl
