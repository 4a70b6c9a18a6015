#pragma once

#include <stdexcept>
#include <string>

namespace rqgnn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required input file is missing or unreadable.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset content. Carries the offending line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Matrix too large for the dense eigendecomposition oracle.
class OracleCapacityError : public Error {
 public:
  using Error::Error;
};

class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace rqgnn
