#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cartanlab {

/// Base for all library errors.  The CLI maps these to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed configuration (unknown label, bad key, schema violation).
struct ConfigError : Error {
  using Error::Error;
};

/// Operand mismatch (dimension, grid, algebra, degree range).
struct ArgumentError : Error {
  using Error::Error;
};

/// Operation undefined at this form degree.
struct DegreeError : Error {
  using Error::Error;
};

/// Iterative solve failed to reach tolerance.
struct SolverError : Error {
  SolverError(const std::string& what, double residual_, int iterations_)
      : Error(what), residual(residual_), iterations(iterations_) {}
  double residual;
  int iterations;
};

/// Frame construction degenerated (immersion not full rank, seed exhaustion).
struct FrameError : Error {
  using Error::Error;
};

/// Energy relaxation failed; carries the energy trace for diagnosis.
struct FlowError : Error {
  FlowError(const std::string& what, std::vector<double> trace)
      : Error(what), energy_trace(std::move(trace)) {}
  std::vector<double> energy_trace;
};

}  // namespace cartanlab
