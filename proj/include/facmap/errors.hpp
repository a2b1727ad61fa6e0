#pragma once

#include <stdexcept>
#include <string>

namespace facmap {

/// Input outside the mathematical domain of an operation (bad latitude, no
/// positive examples, all-zero confusion counts, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (bad CSV row, wrong tensor shape,
/// invalid world spec).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A required input file or record is absent.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or encoding failure while reading/writing an artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace facmap
