#pragma once

#include <stdexcept>
#include <string>

namespace csdg {

// Base of every error raised by the library. Subclasses identify the
// failing contract so the CLI can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or arguments outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Violated preconditions (frozen model retrained, non-scalar backward, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Bad command line or configuration; mapped to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace csdg
