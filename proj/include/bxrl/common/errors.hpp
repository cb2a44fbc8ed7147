#pragma once

#include <stdexcept>
#include <string>

namespace bxrl {

// Caller broke a documented precondition (shape mismatch, stepping a
// terminal state, misaligned sequences).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A named record (epoch, t, file, ...) does not exist.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedOpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs were produced under a different parameter snapshot than the one
// supplied.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TractabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical blow-up during optimisation (NaN loss or objective).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bxrl
