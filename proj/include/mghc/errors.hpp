#pragma once

#include <stdexcept>
#include <string>

namespace mghc {

/// Configuration values that violate a documented invariant.
class InvalidConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Newton-Raphson power flow failed to reach its mismatch tolerance.
class SolverDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A device function was called in a mode where it is not defined.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace mghc
