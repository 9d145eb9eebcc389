#pragma once

#include <stdexcept>
#include <string>

namespace gpte {

// Error taxonomy mirrored by the CLI exit codes:
//   1 usage/config, 2 data/format, 3 numerical abort.
class Error : public std::runtime_error {
 public:
  Error(std::string message, int exit_code)
      : std::runtime_error(std::move(message)), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

// Invalid configuration value or field combination.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string message) : Error(std::move(message), 1) {}
};

// API misuse: bad argument to an operation (not config-file related).
class UsageError : public Error {
 public:
  explicit UsageError(std::string message) : Error(std::move(message), 1) {}
};

// Tensor dimension mismatch.
class ShapeError : public Error {
 public:
  explicit ShapeError(std::string message) : Error(std::move(message), 1) {}
};

// Bad input data: out-of-vocabulary ids, corpus too short, missing files.
class DataError : public Error {
 public:
  explicit DataError(std::string message) : Error(std::move(message), 2) {}
};

// Malformed serialized artifact (checkpoint, config file).
class FormatError : public Error {
 public:
  explicit FormatError(std::string message) : Error(std::move(message), 2) {}
};

// Non-finite value produced where the contract requires finite results.
class NumericsError : public Error {
 public:
  explicit NumericsError(std::string message) : Error(std::move(message), 3) {}
};

}  // namespace gpte
