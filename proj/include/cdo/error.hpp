#pragma once

#include <stdexcept>
#include <string>

namespace cdo {

/// Invalid or inconsistent configuration. `field` is the dotted config path
/// (e.g. "learning.delta") when the error originates from a config value.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Missing, malformed, non-finite or insufficient data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observability matrix singular or above the condition limit.
class Unobservable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Non-finite state encountered while integrating.
class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cdo
