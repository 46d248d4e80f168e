#pragma once

#include <stdexcept>
#include <string>

namespace fractoid {

/// Base of every error raised by the library. Each subclass maps onto one
/// failure category; the CLI turns categories into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values (non-positive steps, empty inputs, mismatched grids).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Coordinate point outside a chart's valid region.
class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularMetricError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state produced while integrating a path.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Reject-and-resample exhausted its retries near a chart boundary.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// Conditional-expectation estimators with nothing to average.
class EstimationError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Gamma-matrix or metric conventions that do not fit together.
class ConventionError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: unknown registry names, malformed files, missing keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fractoid
