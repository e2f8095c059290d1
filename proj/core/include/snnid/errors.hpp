#pragma once

#include <stdexcept>
#include <string>

namespace snnid {

// Bad user-facing configuration: unknown keys, unparsable values, missing
// inputs. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: non-finite op results, diverging
// integration, degenerate measurements. The CLI maps this to exit code 3;
// the training loop catches it per epoch and skips the update.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace snnid
