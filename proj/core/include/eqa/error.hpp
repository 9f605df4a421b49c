#pragma once

#include <stdexcept>
#include <string>

namespace eqa {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// A post-condition or invariant did not hold (exit code 4).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

class NoPathError : public Error {
 public:
  using Error::Error;
};

}  // namespace eqa
