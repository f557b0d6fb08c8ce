#pragma once

#include <stdexcept>
#include <string>

namespace promptseg {

/// Base class for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-supplied data violates a precondition (empty manifest, zero-area
/// image, empty prompt, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Matrix / raster dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates its invariant, or a config file is malformed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A key (label, feature id, class name) is not present in a registry.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// The selector was handed an empty candidate list.
class NoCandidatesError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss; carries the offending epoch.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace promptseg
