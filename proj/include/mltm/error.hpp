#pragma once

#include <stdexcept>
#include <string>

namespace mltm {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or corrupted input files.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class VersionError : public IntegrityError {
 public:
  VersionError(const std::string& what_file, unsigned expected, unsigned found)
      : IntegrityError(what_file + ": unsupported format version (expected " +
                       std::to_string(expected) + ", found " +
                       std::to_string(found) + ")"),
        expected_(expected),
        found_(found) {}

  unsigned expected() const { return expected_; }
  unsigned found() const { return found_; }

 private:
  unsigned expected_;
  unsigned found_;
};

// Argument violates a documented precondition (dimension mismatch etc).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Raised when corpus construction leaves nothing to model.
class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during numerical optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mltm
