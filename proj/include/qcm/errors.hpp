// Error types that map onto the CLI exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace qcm {

// Bad user input: unknown keys, malformed values, inconsistent grids. Exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: singular solves, invalid states, failed validation. Exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qcm
