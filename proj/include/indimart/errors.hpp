#pragma once

#include <stdexcept>
#include <string>

namespace indimart {

// Mismatched domains, unknown points, empty blocks, bad indices.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A type invariant does not hold (weights, refinements, couplings).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input does not satisfy an operation's precondition (non-martingale,
// nonzero conditional mean).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A random vector is not constant on the blocks it must be constant on.
class MeasurabilityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Something that cannot happen in exact arithmetic did happen, e.g. a
// stage that produced eta = 0 for a nonzero xi.
class TheoryViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace indimart
