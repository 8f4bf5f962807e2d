#pragma once

#include <stdexcept>
#include <string>

namespace ringgyro {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested Fock dimension exceeds the memory budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Occupation vector does not belong to the basis.
class InvalidOccupation : public Error {
 public:
  using Error::Error;
};

// Input violates a documented precondition (non-unitary matrix, bad parity, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class GateSpecError : public Error {
 public:
  using Error::Error;
};

class UnsupportedGeometry : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// Fisher information is zero, so no finite Cramer-Rao bound exists.
class NoInformationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ringgyro
