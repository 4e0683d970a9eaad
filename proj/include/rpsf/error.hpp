#pragma once

#include <stdexcept>
#include <string>

namespace rpsf {

/// Invalid configuration or parameter values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tensor shapes that do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative scheme produced non-finite or runaway values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A normal-equation system that cannot be solved.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, int first, int second)
      : std::runtime_error(what), first_(first), second_(second) {}

  int first() const { return first_; }
  int second() const { return second_; }

 private:
  int first_;
  int second_;
};

/// Read/write failures and malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rpsf
