#pragma once

#include <stdexcept>
#include <string>

namespace pcrank {

// All library failures derive from Error so callers (the Monte Carlo harness
// in particular) can count a failed replication without catching std::exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegeneratePairError : public Error {
 public:
  using Error::Error;
};

class TooFewItemsError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Comparison graph is disconnected, so merits are not identified.
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

// Projected covariate Gram matrix is (numerically) singular.
class CollinearityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcrank
