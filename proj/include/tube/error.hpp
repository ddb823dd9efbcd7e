#pragma once

#include <stdexcept>
#include <string>

namespace tube {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV cell, JSON field).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value is present but outside its admissible domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Column layout or bundle schema does not match what was expected.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input carries too little variation for the requested construction.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Posterior class mass vanished during an EM update.
class DegeneratePosteriorError : public Error {
 public:
  using Error::Error;
};

/// An invariant that the algorithms guarantee was observed broken.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

class BootstrapInstabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace tube
