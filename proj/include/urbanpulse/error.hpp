#pragma once

#include <stdexcept>
#include <string>

namespace urbanpulse {

/// Malformed input that cannot be interpreted at all.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input violating a domain invariant (duplicate ids, bad ranges).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A statistical routine was called outside its domain (too few samples,
/// zero variance, singular regression design).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace urbanpulse
