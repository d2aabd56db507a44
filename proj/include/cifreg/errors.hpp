#pragma once

#include <stdexcept>
#include <string>

namespace cifreg {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or out-of-domain input (t <= 0 for a Weibull hazard, p outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (conflicting model parameters, malformed config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: quadrature or root finder did not reach tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Model cannot be fit to the data (non-identifiable, collinear, monotone likelihood).
class FitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public FitError {
 public:
  using FitError::FitError;
};

/// Inverse-probability weight with a vanishing censoring survivor.
class WeightOverflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TestError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cifreg
