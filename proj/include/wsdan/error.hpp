#pragma once

#include <stdexcept>
#include <string>

namespace wsdan {

/// Shape/size mismatch between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A stated precondition of an operation was violated.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Malformed input file; message carries the line number where known.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing key/id/file during a join or store lookup.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wsdan
