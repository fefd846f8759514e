#pragma once

#include <stdexcept>
#include <string>

namespace ffgt {

// Bad user-facing configuration (unknown key, malformed value, inconsistent
// model dimensions). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / serialization failure. CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset manifest does not match the requested configuration. Exit code 4.
class ManifestMismatchError : public std::runtime_error {
 public:
  explicit ManifestMismatchError(const std::string& what)
      : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace ffgt
