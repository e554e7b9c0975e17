#pragma once

#include <stdexcept>
#include <string>

namespace eegsr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV, manifest, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required input artifact does not exist.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace eegsr
