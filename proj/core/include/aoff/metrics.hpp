#pragma once

#include <cstdint>
#include <vector>

#include "aoff/image.hpp"

namespace aoff {

/// Mean local structural similarity with an 11x11 Gaussian window
/// (sigma 1.5), stability constants K1 = 0.01, K2 = 0.03 and dynamic
/// range 1. Windows are evaluated only where they fit entirely inside
/// the image.
double ssim(const RealImage& a, const RealImage& b);

/// sqrt(mean (a-b)^2)
double rmse(const RealImage& a, const RealImage& b);

double accuracy(const std::vector<int>& predictions, const std::vector<uint8_t>& labels);

/// 10x10 counts; row = true class, column = predicted class.
std::vector<std::vector<int>> confusion(const std::vector<int>& predictions,
                                        const std::vector<uint8_t>& labels,
                                        int num_classes = 10);

/// Agreement between a physically simulated output and its ideal
/// oracle, per mask preset.
struct AgreementReport {
    double ssim_value = 0.0;
    double rmse_value = 0.0;
};

AgreementReport agreement(const RealImage& test, const RealImage& reference);

/// Scale an image to [0,1] by its own maximum (no-op for all-zero
/// input). Used to put camera counts and raw intensities on a common
/// footing before computing agreement.
RealImage normalize_to_unit(const RealImage& img);

}  // namespace aoff
