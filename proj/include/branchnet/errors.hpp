#pragma once

#include <stdexcept>

namespace branchnet {

/// Malformed or inconsistent input: CSV contents, score files, broken
/// serialized artifacts. Mapped to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced or received by a numerical routine.
/// Mapped to CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad invocation beyond what the argument parser catches.
/// Mapped to CLI exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace branchnet
