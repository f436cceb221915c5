#pragma once

#include <stdexcept>
#include <string>

namespace toposeg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input content or configuration is invalid (maps to CLI exit status 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Two volumes that must share geometry do not.
class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A label map holds values outside the declared region convention.
class LabelError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A file could not be opened, read or written (maps to CLI exit status 2).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace toposeg
