#pragma once

#include <stdexcept>
#include <string>

namespace ptctc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not match, or a dense size guard was exceeded.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on parameters or input states was violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Eigensolver failure, step-size underflow, conservation drift, ...
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A reduced coordinate chart is singular at the requested point.
class ChartError : public Error {
 public:
  using Error::Error;
};

}  // namespace ptctc
