#pragma once

#include <stdexcept>
#include <string>

namespace nucgrade {

// Thrown for bad configuration files, bad CLI arguments and invalid
// parameter combinations. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for unreadable, missing or inconsistent dataset files.
// CLI maps this to exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the synthetic generator when instances cannot be placed.
struct PlacementError : std::runtime_error {
  explicit PlacementError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nucgrade
