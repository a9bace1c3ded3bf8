#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories. Everything derives from Error so callers can catch the
// whole family, while tests can distinguish the specific kind.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed arguments: wrong dimensions, non-finite entries, bad ranges.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A documented precondition does not hold (e.g. matrix not Hurwitz).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Computation broke down numerically (singular factor, non-finite result).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Query outside the domain an object was built for.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or unusable configuration values.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// A cached object is being used outside its window of validity.
class StalenessError : public Error {
 public:
  using Error::Error;
};

// A planning instant exhausted every solve attempt; the message carries the
// diagnostics of each attempt.
class PlannerFailureError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmpc
