#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace redsim {

// Argument outside the mathematical domain of an operation (w_q outside (0,1),
// probability outside [0,1], non-positive rate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// One or more invariant violations in a configuration. All violations are
// collected so callers can report them together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  explicit ConfigError(const std::string& violation)
      : ConfigError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Numerical integration produced a non-finite state or broke a model invariant.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated input data (event logs, CSV files, datasets).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Output location cannot be created or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace redsim
