#pragma once

#include <complex>

// Thin wrapper over FFTW used by the field ops and the training hot
// loops. Plans are cached per (rows, cols, direction) and created with
// FFTW_UNALIGNED, so execution on arbitrary caller buffers is safe and
// concurrent executions need no lock.

namespace aoff::detail {

inline constexpr int kForward = -1;   // matches FFTW_FORWARD
inline constexpr int kBackward = +1;  // matches FFTW_BACKWARD

/// Unscaled c2c transform of a rows x cols row-major buffer. in == out
/// is allowed.
void fft2_raw(int rows, int cols, int direction, const std::complex<double>* in,
              std::complex<double>* out);

}  // namespace aoff::detail
