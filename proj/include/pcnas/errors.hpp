#pragma once

#include <stdexcept>
#include <string>

namespace pcnas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-space genome text. `field()` names the offending gene
/// or section, e.g. "R[4]" or "K".
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Inconsistent supernet description (dangling site binding, bad input
/// reference, channel mismatch).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Invalid run parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcnas
