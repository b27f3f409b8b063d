#pragma once

#include <stdexcept>
#include <string>

namespace orthopolicy {

/// Error categories; the numeric value doubles as the CLI exit code.
enum class ErrorKind : int {
  Config = 2,
  Data = 3,
  Estimation = 4,
  Numeric = 5,
  Argument = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

struct EstimationError : Error {
  explicit EstimationError(const std::string& m) : Error(ErrorKind::Estimation, m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error(ErrorKind::Argument, m) {}
};

}  // namespace orthopolicy
