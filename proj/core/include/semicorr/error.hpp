#pragma once

#include <stdexcept>
#include <string>

namespace semicorr {

// Base of everything the library throws on its own.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, violated preconditions, schema problems.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Objects built on different grids were combined.
class ContextMismatch : public Error {
 public:
  using Error::Error;
};

// NaN, blow-up, failed solves, lost invariants.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Dense kernel requested beyond the supported size.
class SizeLimit : public Error {
 public:
  using Error::Error;
};

}  // namespace semicorr
