#pragma once

#include <stdexcept>

namespace releqf {

// Numeric failure taxonomy. Each type marks a condition the caller can act on;
// the C API maps them one-to-one onto status codes.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// vee() received a matrix whose symmetric part exceeds the tolerance.
struct NonSkewInput : NumericError {
  using NumericError::NumericError;
};

// so3_log() received a rotation within 1e-6 rad of the pi-angle branch cut.
struct NearPiSingularity : NumericError {
  using NumericError::NumericError;
};

// A covariance update produced a matrix that is no longer positive definite
// (step too large for the current gains).
struct LostPositivity : NumericError {
  using NumericError::NumericError;
};

// Reference directions are collinear; the two-vector geometry is degenerate.
struct DegenerateDirections : NumericError {
  using NumericError::NumericError;
};

}  // namespace releqf
