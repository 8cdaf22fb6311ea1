#pragma once

#include <stdexcept>
#include <string>

namespace basiccs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input values: bad treatment codes, missing cells, empty data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Column layout of a file or artifact does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Ill-conditioned kernels, non-finite objectives, diverged optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace basiccs
