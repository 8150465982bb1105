#pragma once

#include <stdexcept>
#include <string>

namespace plateflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing parameters (grid sizes, norms orders, config keys).
struct ParameterError : Error {
  using Error::Error;
};

// Geometry became invalid (Jacobian floor violations).
struct GeometryError : Error {
  using Error::Error;
};

// Linear solver or eigensolver failures.
struct SolverError : Error {
  using Error::Error;
};

// Non-finite values produced by model evaluation or assembly.
struct NumericError : Error {
  using Error::Error;
};

// Time-stepping failures; message carries the step index.
struct StepError : Error {
  using Error::Error;
};

}  // namespace plateflow
