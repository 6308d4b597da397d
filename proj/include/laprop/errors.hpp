#pragma once

#include <stdexcept>
#include <string>

namespace laprop {

/// Raised when a gradient or forward pass produces NaN/inf. Never swallowed:
/// callers that want "divergence" semantics catch this explicitly.
struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on malformed external data (IDX files, CSV, config files).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace laprop
