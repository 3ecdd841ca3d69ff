#pragma once

#include <stdexcept>
#include <string>

namespace sdpse {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: schema violations, bad references, non-positive sigma.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// The measurement set cannot pin down the lifted state.
class UnobservableError : public Error {
  public:
    using Error::Error;
};

/// The interior-point solve failed or the lifted state is unusable.
class SolverError : public Error {
  public:
    using Error::Error;
};

/// Bad-data identification would need more combinations than allowed.
class BudgetError : public Error {
  public:
    using Error::Error;
};

}  // namespace sdpse
