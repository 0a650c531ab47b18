#ifndef FGP_ERROR_HPP_
#define FGP_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fgp {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Failures of the numerical machinery (factorizations, admissibility).
class NumericalError : public Error {
public:
  using Error::Error;
};

// Inputs that are malformed or inconsistent with the model.
class DataError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public DataError {
public:
  using DataError::DataError;
};

class NotPositiveDefinite : public NumericalError {
public:
  // pivot < 0 when the failing pivot could not be located.
  explicit NotPositiveDefinite(std::int64_t pivot)
      : NumericalError(pivot >= 0 ? "matrix is not positive definite (pivot " +
                                        std::to_string(pivot) + ")"
                                  : "matrix is not positive definite"),
        pivot_(pivot) {}

  std::int64_t pivot() const { return pivot_; }

private:
  std::int64_t pivot_;
};

class GammaOutOfRange : public NumericalError {
public:
  GammaOutOfRange(double gamma, double lo, double hi)
      : NumericalError("gamma " + std::to_string(gamma) +
                       " outside admissible interval (" + std::to_string(lo) +
                       ", " + std::to_string(hi) + ")"),
        gamma_(gamma), lo_(lo), hi_(hi) {}

  double gamma() const { return gamma_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

private:
  double gamma_, lo_, hi_;
};

class AsymmetricPrecision : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ZeroMatrix : public NumericalError {
public:
  ZeroMatrix() : NumericalError("proximity matrix has no nonzero entries") {}
};

class SingularGram : public NumericalError {
public:
  SingularGram() : NumericalError("X'DX is not invertible") {}
  using NumericalError::NumericalError;
};

class DimensionMismatch : public DataError {
public:
  using DataError::DataError;
};

class LocationOutsideLattice : public DataError {
public:
  explicit LocationOutsideLattice(std::int64_t index)
      : DataError("location " + std::to_string(index) +
                  " is outside the lattice"),
        index_(index) {}

  std::int64_t index() const { return index_; }

private:
  std::int64_t index_;
};

class EmptyDomain : public DataError {
public:
  using DataError::DataError;
};

class DegenerateData : public DataError {
public:
  using DataError::DataError;
};

class EmptyHoldout : public DataError {
public:
  EmptyHoldout() : DataError("holdout set is empty") {}
  using DataError::DataError;
};

class SimulationTooLarge : public DataError {
public:
  using DataError::DataError;
};

} // namespace fgp

#endif // FGP_ERROR_HPP_
