#pragma once

#include <stdexcept>
#include <string>

namespace lamelab {

/// Root of the library's exception hierarchy. Each subclass names one failure
/// mode so callers (and the CLI's exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Elastic coupling outside the strong-ellipticity window alpha > -1.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Evaluation of the fundamental matrix at its pole.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Sign-change scan found no root where one must exist.
class BracketFailure : public Error {
 public:
  using Error::Error;
};

/// Integrand does not vanish at the edge of the quadrature range.
class NonCompactSupport : public Error {
 public:
  using Error::Error;
};

/// Iterative solver hit its iteration cap above tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Requested dyadic level is finer than the voxel grid can resolve.
class ResolutionExceeded : public Error {
 public:
  using Error::Error;
};

/// Too few dyadic levels for a decay fit.
class InsufficientLevels : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Command-line flag or config value the tool rejects.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace lamelab
