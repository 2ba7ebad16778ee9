#pragma once

#include <stdexcept>
#include <string>

namespace chimeramix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files (dataset containers, checkpoints, caches).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Violated preconditions on arguments: shapes, ranges, counts.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Run-configuration problems; the message always starts with the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss became NaN or infinite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace chimeramix
