#pragma once

#include <stdexcept>
#include <string>

namespace lpb {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/grid dimension disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value, solver breakdown, or failed numeric contract.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File format or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpb
