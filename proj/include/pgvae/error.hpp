#pragma once

#include <stdexcept>
#include <string>

namespace pgvae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when matrix or vector shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised on bad arguments, malformed input files, or invalid configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a NaN or infinity shows up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgvae
