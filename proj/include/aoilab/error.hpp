#pragma once

#include <stdexcept>
#include <string>

namespace aoilab {

/// Base of every error raised by the library. The C API maps each subclass
/// onto a distinct status code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the analytic domain of a transform (e.g. Re(s) <= -mu).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed or out-of-range argument.
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// Valid input for which no formula or algorithm is available
/// (e.g. closed forms for buffers of three or more cells).
class UnsupportedError : public Error {
public:
  using Error::Error;
};

/// Quadrature or inversion failed to converge. Carries the two competing
/// estimates when the failure was detected by comparing refinements.
class NumericError : public Error {
public:
  NumericError(const std::string& what, double first = 0.0, double second = 0.0)
      : Error(what), first_(first), second_(second) {}

  double first_estimate() const noexcept { return first_; }
  double second_estimate() const noexcept { return second_; }

private:
  double first_;
  double second_;
};

/// The simulator could not produce the requested number of successful
/// departures within its event budget.
class SimulationError : public Error {
public:
  using Error::Error;
};

}  // namespace aoilab
