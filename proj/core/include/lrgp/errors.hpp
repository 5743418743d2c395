#pragma once

#include <stdexcept>

namespace lrgp {

// Malformed input data: CSV parse failures, missing columns, ragged rows.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: factorization breakdown, violated PSD precondition,
// non-finite objective.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lrgp
