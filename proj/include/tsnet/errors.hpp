#pragma once

#include <stdexcept>
#include <string>

namespace tsnet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input dimensions do not chain or do not match the network.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed network document, dataset, or config file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied arguments outside an operation's domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value or an inconsistent result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsnet
