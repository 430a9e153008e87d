#pragma once

#include <stdexcept>
#include <string>

namespace sharpdepth {

// Base of every error the library throws. The CLI maps subclasses onto its
// exit codes (config 2, I/O 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension too small, mismatched shapes, sizes not divisible by 32, bad
// scale index.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// All-invalid masks, empty point clouds, empty edge bands, empty splits.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, non-positive depths, training divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed or infeasible configuration, missing dataset index.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or unwritable files, unsupported encodings.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sharpdepth
