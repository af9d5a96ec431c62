#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace purcellsim {

// Precondition on a numeric argument violated (nonpositive lifetime, empty grid, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation point outside the region a function is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Applied EO voltage exceeds the breakdown guard of the cavity.
class BreakdownError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Structured input (profile, sequence, config) is inconsistent.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An estimator has no defined value for the given data (e.g. zero mean count).
class UndefinedEstimate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace purcellsim
