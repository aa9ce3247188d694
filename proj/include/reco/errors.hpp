#pragma once

#include <stdexcept>
#include <string>

namespace reco {

/// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector dimensions disagree (features vs. weights, mask vs. features, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A declared property of a user-supplied object does not hold
/// (e.g. a decision rule that is not monotone in the recommendation).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace reco
