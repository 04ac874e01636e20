#pragma once

#include <stdexcept>
#include <string>

namespace tiedgmm {

// Shape disagreement between operands (non-square input, mismatched sizes).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A matrix that must be invertible is (numerically) singular.
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input file (CSV / JSON).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tiedgmm
