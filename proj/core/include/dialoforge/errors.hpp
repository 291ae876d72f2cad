#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dialoforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain-type invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string entry_id, std::string field, const std::string& message)
      : Error("validation error in entry '" + entry_id + "' field '" + field + "': " + message),
        entry_id_(std::move(entry_id)),
        field_(std::move(field)) {}

  const std::string& entry_id() const { return entry_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string entry_id_;
  std::string field_;
};

/// Malformed input at a known line (1-based).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StartupError : public Error {
 public:
  using Error::Error;
};

/// A state transition was refused. `code()` is a stable machine-readable tag.
class StateError : public Error {
 public:
  StateError(std::string code, const std::string& message)
      : Error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to an external (or mock) model client.
class ClientError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialoforge
