// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tct {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

/// Invalid scalar parameter (sigma, tau, lambda, counts, ...).
struct ParameterError : Error {
  using Error::Error;
};

/// Spatial index or box outside the valid extent.
struct OutOfBoundsError : Error {
  using Error::Error;
};

/// Operation requires a non-empty template ensemble.
struct EmptyEnsembleError : Error {
  using Error::Error;
};

/// Configuration file could not be parsed; carries a line number.
struct ConfigError : Error {
  int line = 0;
  ConfigError(const std::string& msg, int line_no)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// File could not be read or written.
struct IoError : Error {
  using Error::Error;
};

}  // namespace tct
