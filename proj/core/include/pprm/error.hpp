#pragma once

#include <stdexcept>
#include <string>

namespace pprm {

// Every failure raised by the library derives from Error, so callers that
// only care about "did it work" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated operation precondition (e.g. empty labeled batch).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its admissible range (e.g. eta > eta_max).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Data value outside its admissible range (e.g. a loss outside [0,1]).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Quadrature overflow or a root bracket that cannot be established.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Time indices out of order.
class SequencingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace pprm
