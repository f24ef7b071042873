#pragma once

#include <stdexcept>
#include <string>

namespace pjfit {

// Malformed input files, unresolved ids, unusable schemas. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Schema fitting failed (e.g. a real-valued field is constant on train).
class SchemaFitError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite loss or gradient. Maps to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Programming errors: mismatched shapes, out-of-range indices, backward
// without a forward pass.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pjfit
