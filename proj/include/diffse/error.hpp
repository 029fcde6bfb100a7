// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace diffse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (empty signal, shape mismatch, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation left its numerically valid domain (vanishing sigma,
/// overflowing exponentials, non-finite state).
class NumericalDomainError : public Error {
 public:
  using Error::Error;
};

/// API used out of order, e.g. a backward pass without its forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace diffse
