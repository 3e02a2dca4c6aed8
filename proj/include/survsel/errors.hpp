#pragma once

#include <stdexcept>
#include <string>

namespace survsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input files disagree with each other (e.g. different instance sets).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a function argument was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// The data cannot support the requested computation.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant (e.g. step-function monotonicity) does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace survsel
