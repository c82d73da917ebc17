#pragma once

#include <stdexcept>
#include <string>

namespace scov {

// Numerical failure inside an algorithm (non-convergence, dead frequency,
// rank deficiency). Preconditions on arguments use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Container and file-format failures.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class SchemaError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class BasisMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace scov
