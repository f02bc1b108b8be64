#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance or model does not agree with the attribute schema.
class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid hyper-parameter or incompatible combination of options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Internal invariant broken (for example a cycle in the feature graph).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A freshly created feature could not be brought to match its input.
class InitFailure : public Error {
 public:
  using Error::Error;
};

/// Map or patch geometry does not fit.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Dataset parse failure. `row` is 1-based and counts the header as row 1.
class LoadError : public Error {
 public:
  LoadError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace adn
