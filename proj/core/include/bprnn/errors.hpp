#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bprnn {

// Root of every error thrown by the library. Messages are single-line so the
// CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Non-finite activation or loss. Layer is 1-based (0 = embedding/head),
// timestep is 1-based; either may be 0 when not applicable.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t layer, std::size_t timestep)
      : NumericError(what), layer_(layer), timestep_(timestep) {}

  [[nodiscard]] std::size_t layer() const noexcept { return layer_; }
  [[nodiscard]] std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t layer_;
  std::size_t timestep_;
};

class InitializationError : public Error {
 public:
  InitializationError(const std::string& what, std::size_t layer, double variance)
      : Error(what), layer_(layer), variance_(variance) {}

  [[nodiscard]] std::size_t layer() const noexcept { return layer_; }
  [[nodiscard]] double variance() const noexcept { return variance_; }

 private:
  std::size_t layer_;
  double variance_;
};

class DegenerateLayerError : public InitializationError {
 public:
  using InitializationError::InitializationError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public IoError {
 public:
  using IoError::IoError;
};

class VocabularyError : public IoError {
 public:
  using IoError::IoError;
};

// Checkpoint decoding failures.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class PayloadLengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MetadataError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace bprnn
