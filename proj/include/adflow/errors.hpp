// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace adflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Two operands disagree in length, rate or layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The input is degenerate for the requested quantity (zero norm, s1 == b).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// sigma_tau vanished while sigma' is non-zero.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A state or loss became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long index)
      : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// File could not be opened, parsed or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Run configuration is malformed (unknown key, bad value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace adflow
