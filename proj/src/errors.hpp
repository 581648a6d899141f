#pragma once

#include <stdexcept>
#include <string>

namespace ptc {

// Error taxonomy mirrors the CLI exit codes: configuration / usage
// problems exit 2, I/O problems exit 3, numerical failures exit 4.

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ptc
