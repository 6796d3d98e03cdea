#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vpsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document or malformed annotated text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A well-formed document that breaks a domain invariant. Carries every
/// violation found, each naming the offending key.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  ValidationError(const std::string& what, std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Operation not allowed in the current session/state-machine state.
class StateError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace vpsim
