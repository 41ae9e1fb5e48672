#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tailcen {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (exit code 2 at the CLI).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, std::vector<std::size_t> rows = {})
      : std::invalid_argument(what), rows_(std::move(rows)) {}

  /// Offending (0-based, data-row) indices, when the error is row-specific.
  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

/// A numerical routine failed to converge (exit code 3 at the CLI).
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what, std::vector<double> diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const std::vector<double>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<double> diagnostics_;
};

}  // namespace tailcen
