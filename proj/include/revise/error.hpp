#pragma once

#include <stdexcept>
#include <string>

namespace revise {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input, configuration, or out-of-range argument.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Network failure after retries were exhausted.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A readiness gate or failure budget was not met.
class GateError : public Error {
 public:
  using Error::Error;
};

}  // namespace revise
