#pragma once

#include <stdexcept>
#include <string>

namespace clidd {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions that cannot be combined (non-divisible sizes, empty outputs, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Channel counts, weights or presets that do not fit together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unsupported input (images, feature files, paths).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Output files that cannot be created or written.
class OutputError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary files (weights, feature files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// SVD failures, degenerate estimation problems and similar.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace clidd
