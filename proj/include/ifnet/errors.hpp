#pragma once

#include <stdexcept>
#include <string>

namespace ifnet {

/// An argument violated an operation's precondition (sizes, ranges, shapes).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A weighted Procrustes problem whose cross-covariance is rank deficient.
class DegeneracyError : public std::runtime_error {
 public:
  DegeneracyError(const std::string& what, int rank) : std::runtime_error(what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// Pipeline state is inconsistent (e.g. feedback requested before it was written).
class InternalStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ifnet
