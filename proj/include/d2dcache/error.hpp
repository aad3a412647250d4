#pragma once

#include <stdexcept>
#include <string>

namespace d2dcache {

enum class ErrorCategory {
  parameter,
  domain,
  numerical,
  range,
  io,
  config,
  internal,
};

const char* category_name(ErrorCategory category) noexcept;

/// Base of every exception thrown by the library. The category maps 1:1 onto
/// the status codes of the C API and the exit codes of the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& message)
      : Error(ErrorCategory::parameter, message) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error(ErrorCategory::domain, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorCategory::numerical, message) {}
};

/// Raised when a Dinkelbach surrogate leaves the range where the utility
/// ordering u_b <= u_d <= u_s holds.
class RangeError : public Error {
 public:
  RangeError(const std::string& message, double offending_value)
      : Error(ErrorCategory::range, message), value_(offending_value) {}

  double offending_value() const noexcept { return value_; }

 private:
  double value_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorCategory::io, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCategory::config, message) {}
};

/// A broken internal invariant, never the caller's fault.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& message)
      : Error(ErrorCategory::internal, message) {}
};

}  // namespace d2dcache
