// Error hierarchy shared by all stages. The C API maps these to status codes.
#pragma once

#include <stdexcept>
#include <string>

namespace tdg {

// Bad configuration: missing files, inconsistent parameters. Exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: schema mismatch, invariant violation. Exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric fault: non-finite activation, divergence. Exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tdg
