#pragma once

#include <stdexcept>
#include <string>

namespace trackfm {

// Error taxonomy. The CLI maps each class to a distinct exit code
// (see tools/): io 3, data/config 4, numeric 5.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a structural contract (unparseable line, unsorted
// sequence, vocabulary mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: diverged training, singular solve, zero-norm vector.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single event whose fields are inconsistent. Callers usually skip
// the event and bump a diagnostics counter instead of aborting.
class MalformedEvent : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace trackfm
