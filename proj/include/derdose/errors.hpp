#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace derdose {

/// Invalid scenario, study, or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownScenario : public ConfigError {
 public:
  explicit UnknownScenario(int id)
      : ConfigError("unknown scenario " + std::to_string(id) + " (expected 1 or 2)") {}
};

/// Malformed config or CSV input. `line` is 1-based; 0 when unknown.
class ParseError : public ConfigError {
 public:
  ParseError(int line, std::string field, const std::string& message)
      : ConfigError("line " + std::to_string(line) + (field.empty() ? "" : ", field '" + field + "'") +
                    ": " + message),
        line_(line),
        field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Output could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed-form variance function received a non-positive variance.
class NonPositiveVariance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The large-sample reference fit failed; results would be meaningless.
class GoldStandardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace derdose
