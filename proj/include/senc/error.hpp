#pragma once

#include <stdexcept>
#include <string>

namespace senc {

// Error taxonomy shared across the library. Everything derives from Error so
// callers can catch coarsely; the CLI maps these to messages and exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

// log/pow/softmax/div domain violations.
struct NumericDomainError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar, backward twice, mixed tapes.
struct ContractError : Error {
  using Error::Error;
};

// Bad user-supplied data (empty mask, indivisible image dims, ...).
struct InputError : Error {
  using Error::Error;
};

// Bad configuration value or unknown key.
struct ConfigError : Error {
  using Error::Error;
};

// File format violations (magic, truncation, dtype).
struct FormatError : Error {
  using Error::Error;
};

// Internal consistency violations (missing edge feature row, ...).
struct IntegrityError : Error {
  using Error::Error;
};

}  // namespace senc
