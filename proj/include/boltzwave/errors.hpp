#pragma once

#include <stdexcept>
#include <string>

namespace boltzwave {

/// Process exit codes used by the CLI.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  numerical_failure = 3,
  io_error = 4,
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace boltzwave
