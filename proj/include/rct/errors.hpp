#pragma once

#include <stdexcept>
#include <string>

namespace rct {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (bad CSV field, broken sample invariant).
class DataError : public Error {
 public:
  using Error::Error;
};

// An estimator, variance method, or design applied to inputs it does not
// support (empty arm, missing strata, rank deficiency, degenerate design).
class MismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace rct
