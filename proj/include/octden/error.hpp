#pragma once

#include <stdexcept>
#include <string>

namespace octden {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/image extents do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data violates a precondition (too small, singular, empty).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Data is valid in form but carries no usable information
/// (constant images, single-element batch statistics).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Bad command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

// File format errors. Each failure mode gets its own class so that callers
// can tell a corrupted file from a truncated one.
class FormatError : public Error {
 public:
  using Error::Error;
};
class IoError : public FormatError {
 public:
  using FormatError::FormatError;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};
class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};
class DimensionOverflowError : public FormatError {
 public:
  using FormatError::FormatError;
};
class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace octden
