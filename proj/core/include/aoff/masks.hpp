#pragma once

#include "aoff/image.hpp"

namespace aoff {

/// Frequency-plane mask presets, authored dc_at_center (DC on the
/// optical axis at the grid centre). Radii are normalized to the
/// half-width of the grid, so cutoff 1.0 reaches the edge bins along
/// the axes.

RealImage lowpass_mask(int rows, int cols, double cutoff);
RealImage highpass_mask(int rows, int cols, double cutoff);
RealImage annulus_mask(int rows, int cols, double inner, double outer);

/// Normalized radial frequency of a centred bin; 0 at DC.
double mask_radius(int rows, int cols, int r, int c);

}  // namespace aoff
