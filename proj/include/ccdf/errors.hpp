#pragma once

#include <stdexcept>
#include <string>

namespace ccdf {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable files and undecodable payloads.
class IoError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor, raster or grid dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Inputs that make a computation ill-defined (e.g. a constant image).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or other failure during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccdf
