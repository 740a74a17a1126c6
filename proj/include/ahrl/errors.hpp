#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ahrl {

// Root of every exception thrown by the library. The C API translates these
// into status codes at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Precondition violated by caller-supplied data.
class ContractError : public Error {
 public:
  using Error::Error;
};

class DegeneratePriorError : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Training produced a non-finite loss. The snapshot holds the last log row and
// the offending quantity.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::string snapshot)
      : NumericError(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const noexcept { return snapshot_; }

 private:
  std::string snapshot_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ahrl
