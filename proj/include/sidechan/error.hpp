#pragma once

#include <stdexcept>
#include <string>

namespace sidechan {

/// Base class for every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates its constraint. `key()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& constraint)
      : Error(key + ": " + constraint), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Input precondition violated (wrong length, out-of-range band, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical state became unusable (non-finite levels or samples).
class CorruptState : public Error {
 public:
  using Error::Error;
};

/// Pre-normalisation synthesis peak exceeded the clipping limit.
class ClippingError : public Error {
 public:
  using Error::Error;
};

/// A document or file could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  VersionMismatch(int expected, int found)
      : Error("profile database version mismatch: expected " + std::to_string(expected) +
              ", found " + std::to_string(found)),
        expected_(expected),
        found_(found) {}
  int expected() const noexcept { return expected_; }
  int found() const noexcept { return found_; }

 private:
  int expected_;
  int found_;
};

/// Not enough training material for a label.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Inputs from different runs or configurations do not agree.
class Mismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sidechan
