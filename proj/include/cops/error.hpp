#pragma once

#include <stdexcept>
#include <string>

namespace cops {

/// Thrown when a caller breaks an operation's precondition (dimension
/// mismatch, negative weight, empty dataset, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The Fisher information could not be factorized even after the ridge.
class SingularInformation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A label oracle failed for a drawn index.
class LabelingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace cops
