#pragma once

#include <stdexcept>
#include <string>

namespace dlmp {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Feeder document does not match the schema. The message names the field.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Parent pointers do not form a tree rooted at node 0.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Hourly series with the wrong length, or mismatched vector arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A device or network problem has no feasible point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Backward/forward sweep did not reach the residual target.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace dlmp
