#pragma once

#include <stdexcept>
#include <string>

namespace chmp {

// Exit-code mapping used by the CLI: validation = 2, I/O = 3, numeric = 4.

struct InvalidArgumentError : std::runtime_error {
  explicit InvalidArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : InvalidArgumentError {
  explicit DimensionError(const std::string& msg) : InvalidArgumentError(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric / geometric failure (e.g. degenerate projection during alignment).
struct AlignmentError : std::runtime_error {
  explicit AlignmentError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace chmp
