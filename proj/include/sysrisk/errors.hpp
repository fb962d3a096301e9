#pragma once

#include <stdexcept>
#include <string>

namespace sysrisk {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A risk measure or model parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (dimensions, probabilities, empty collections).
class InputError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for the given risk measure.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on an event of zero probability.
class DegenerateEventError : public Error {
 public:
  using Error::Error;
};

/// A scenario communication graph is not connected.
class ConnectivityError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver did not produce an optimal point.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap.
class NotConvergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace sysrisk
