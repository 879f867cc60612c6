#pragma once

#include <stdexcept>
#include <string>

namespace pushsum {

/// A configuration or model invariant does not hold. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run or solver failed after validation succeeded. The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pushsum
