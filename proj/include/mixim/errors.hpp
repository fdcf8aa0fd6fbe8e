#pragma once

#include <stdexcept>
#include <string>

namespace mixim {

/// Base error: carries the name of the module that raised it so front ends
/// can report "module: context" without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

/// Bad input or configuration (CLI exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown such as a Cholesky failure after the jitter retry.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixim
