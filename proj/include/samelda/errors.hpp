#pragma once

#include <stdexcept>

namespace samelda {

// Invalid configuration, flags, or argument domains. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable, unwritable, or malformed files. CLI exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN or other numerical breakdown detected at runtime. CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace samelda
