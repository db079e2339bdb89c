#pragma once

#include <utility>
#include <vector>

#include "aoff/image.hpp"

namespace aoff {

/// Forward 2-D DFT with orthonormal scaling (1/sqrt(rows*cols) in each
/// direction), so Parseval holds exactly and round trips are lossless.
/// Input and output both carry dc_at_corner layout.
ComplexField dft2(const ComplexField& field);

/// Exact inverse of dft2 under the same scaling.
ComplexField idft2(const ComplexField& field);

/// Quadrant swap moving DC between corner and centre; toggles the
/// layout tag. The direction is chosen from the current tag, so the op
/// is its own inverse for any dimensions (and coincides with the plain
/// swap for even ones).
ComplexField shift_layout(const ComplexField& field);

/// Centre `img` on a target_rows x target_cols canvas of zeros, floor
/// offsets on both axes.
RealImage zero_pad_center(const RealImage& img, int target_rows, int target_cols);

/// Crop the centred window placed by zero_pad_center back out.
RealImage center_crop(const RealImage& img, int out_rows, int out_cols);

/// Replicate each pixel into a factor x factor block.
RealImage expand_pixels(const RealImage& img, int factor);

/// Replace each block x block tile by its mean. Mean rather than sum
/// keeps values inside the camera's 8-bit range; the constant factor is
/// absorbed.
RealImage superpixel_reduce(const RealImage& img, int block);

/// |amplitude|^2 per sample.
RealImage intensity(const ComplexField& field);

struct TilePlacement {
    int row = 0;
    int col = 0;
    int rows = 0;
    int cols = 0;
};

/// Row-major grid packing of equally sized tiles onto a canvas.
/// Capacity is floor(canvas_rows/tile_rows) * floor(canvas_cols/tile_cols);
/// requests beyond it are rejected with the capacity in the message.
std::pair<RealImage, std::vector<TilePlacement>> tile_images(
    const std::vector<RealImage>& images, int canvas_rows, int canvas_cols);

int tile_capacity(int canvas_rows, int canvas_cols, int tile_rows, int tile_cols);

std::vector<RealImage> untile_images(const RealImage& canvas,
                                     const std::vector<TilePlacement>& placements);

}  // namespace aoff
