#pragma once

#include <stdexcept>
#include <string>

namespace egobody {

/// Bad argument: wrong shape, non-finite value, out-of-range index.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A loaded object breaks one of its invariants; `invariant()` names it.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& invariant, const std::string& what)
      : std::runtime_error(invariant + ": " + what), invariant_(invariant) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

/// Configuration problem (unknown key, bad value, incompatible checkpoint).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training blew up; the message names the loss term that went non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A prerequisite artifact is missing (checkpoint, dataset).
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace egobody
