#pragma once

#include <stdexcept>
#include <string>

namespace ivt {

// Base for every error raised by the library. Callers that only care about
// "something in ivt failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched dimensions or incompatible layouts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Violated operation precondition (bad argument, empty input, duplicate id).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, singular systems, non-converging iterations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed files: bad magic, truncated payloads, unparsable cells.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ivt
