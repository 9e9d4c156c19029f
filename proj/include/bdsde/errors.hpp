#pragma once

#include <stdexcept>

namespace bdsde {

// Bad grids, bad plans, bad CLI or config input.  The CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Blowups, rank deficiency, degenerate ensembles.  The CLI maps this to exit 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bdsde
