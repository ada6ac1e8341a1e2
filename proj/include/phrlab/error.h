#pragma once

#include <stdexcept>
#include <string>

namespace phrlab {

// Each error class maps onto one CLI exit code (see cli.h).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or dataset bytes do not match their declared length or hash.
class CorruptionError : public IoError {
 public:
  using IoError::IoError;
};

/// File was written by an unsupported format version.
class IncompatibleError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace phrlab
