#include "aoff/masks.hpp"

#include <cmath>
#include <stdexcept>

namespace aoff {

double mask_radius(int rows, int cols, int r, int c) {
    const double fr = (r - rows / 2) / (rows / 2.0);
    const double fc = (c - cols / 2) / (cols / 2.0);
    return std::hypot(fr, fc);
}

RealImage lowpass_mask(int rows, int cols, double cutoff) {
    if (cutoff < 0.0) throw std::invalid_argument("lowpass_mask: negative cutoff");
    RealImage m(rows, cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (mask_radius(rows, cols, r, c) <= cutoff) m.at(r, c) = 1.0;
    return m;
}

RealImage highpass_mask(int rows, int cols, double cutoff) {
    RealImage m = lowpass_mask(rows, cols, cutoff);
    for (double& v : m.values) v = 1.0 - v;
    return m;
}

RealImage annulus_mask(int rows, int cols, double inner, double outer) {
    if (inner > outer) throw std::invalid_argument("annulus_mask: inner > outer");
    RealImage m(rows, cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double rho = mask_radius(rows, cols, r, c);
            if (rho > inner && rho <= outer) m.at(r, c) = 1.0;
        }
    return m;
}

}  // namespace aoff
