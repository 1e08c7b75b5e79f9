#pragma once

#include <stdexcept>
#include <string>

namespace slmgac {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericFault : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (K larger than the population, B = 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data: bad log files, zero propensities, schema mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A group id outside [0, K).
class RoutingError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An enumeration would exceed its configured bound.
class SizeError : public Error {
 public:
  using Error::Error;
};

}  // namespace slmgac
