#pragma once

#include <stdexcept>
#include <string>

namespace ope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Thrown when a matrix that must be stable (spectral radius < 1) is not.
class StabilityError : public NumericalError {
 public:
  StabilityError(const std::string& what, double rho) : NumericalError(what), rho_(rho) {}
  double rho() const noexcept { return rho_; }

 private:
  double rho_;
};

class SingularCovarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed instance/dataset files or JSON documents.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ope
