#pragma once

#include <stdexcept>
#include <string>

namespace qcfg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, invalid rules read from disk, bad corpus lines.
class DataError : public Error {
 public:
  using Error::Error;
};

// Chart item budget exhausted, sampler acceptance floor hit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class CompositionOverflow : public Error {
 public:
  using Error::Error;
};

// Unknown rule or context when querying model parameters.
class LookupError : public Error {
 public:
  using Error::Error;
};

class UndefinedConditional : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace qcfg
