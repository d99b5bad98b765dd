#pragma once

#include <stdexcept>
#include <string>

namespace conveyor {

// Invalid configuration or input values. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// A named field failed validation.
class ValidationError : public ConfigError
{
public:
  ValidationError(std::string field, std::string const &what)
    : ConfigError(field + ": " + what)
    , field_(std::move(field))
  {
  }

  std::string const &field() const noexcept { return field_; }

private:
  std::string field_;
};

// Numerical failure (non-convergence, degenerate data). Exit code 3.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// File or stream failure. Exit code 4.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace conveyor
