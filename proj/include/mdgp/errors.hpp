#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdgp {

/// A symmetric matrix handed to the Cholesky factorization was not positive
/// definite (pivot below the dimension-scaled tolerance). Callers doing GP
/// simulation may add a small diagonal jitter and retry once.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot_index)
      : std::runtime_error("matrix not positive definite at pivot " +
                           std::to_string(pivot_index)),
        pivot_index(pivot_index) {}
  std::size_t pivot_index;
};

/// CSV row that cannot be parsed at all (wrong field count, unreadable text).
class MalformedRow : public std::runtime_error {
 public:
  MalformedRow(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line(line) {}
  std::size_t line;
};

/// CSV cell that parses but violates its declared outcome type
/// (non-integer count, binary outside {0,1}, non-finite value).
class TypeViolation : public std::runtime_error {
 public:
  TypeViolation(std::size_t line, const std::string& column,
                const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column '" +
                           column + "': " + what),
        line(line),
        column(column) {}
  std::size_t line;
  std::string column;
};

/// Training loss became non-finite and the one-shot learning-rate halving
/// did not recover it.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run-configuration document failed schema validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdgp
