#pragma once

// Independent reference implementations the unit and acceptance suites
// check the library against. Everything here is brute force on purpose
// and must stay decoupled from the code paths under test.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "aoff/image.hpp"

namespace oracle {

using aoff::ComplexField;
using aoff::cplx;
using aoff::FieldLayout;
using aoff::RealImage;

constexpr double kTau = 6.28318530717958647692;

/// O(N^4) forward DFT with orthonormal scaling.
inline ComplexField brute_dft2(const ComplexField& f, int sign = -1) {
    const int R = f.rows, C = f.cols;
    ComplexField out(R, C, FieldLayout::dc_at_corner);
    const double scale = 1.0 / std::sqrt(static_cast<double>(R) * C);
    for (int u = 0; u < R; ++u)
        for (int v = 0; v < C; ++v) {
            cplx s = 0.0;
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) {
                    const double ph = sign * kTau * (double(u) * r / R + double(v) * c / C);
                    s += f.at(r, c) * cplx(std::cos(ph), std::sin(ph));
                }
            out.at(u, v) = s * scale;
        }
    return out;
}

inline ComplexField brute_idft2(const ComplexField& f) { return brute_dft2(f, +1); }

/// Centre-authored mask brought to corner layout by explicit index map.
inline RealImage brute_ifftshift(const RealImage& m) {
    RealImage out(m.rows, m.cols);
    const int hr = m.rows / 2, hc = m.cols / 2;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            out.at(r, c) = m.at((r + hr) % m.rows, (c + hc) % m.cols);
    return out;
}

/// |IDFT(DFT(x) .* K)|^2 via explicit space-domain circular convolution:
/// y = (x (*) h) / sqrt(R*C) with h = IDFT(K), K in corner layout.
inline RealImage circular_conv_mod2(const RealImage& x, const RealImage& mask_center) {
    const int R = x.rows, C = x.cols;
    ComplexField K(R, C, FieldLayout::dc_at_corner);
    const RealImage mk = brute_ifftshift(mask_center);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) K.at(r, c) = mk.at(r, c);
    const ComplexField h = brute_idft2(K);
    const double scale = 1.0 / std::sqrt(static_cast<double>(R) * C);
    RealImage out(R, C);
    for (int n = 0; n < R; ++n)
        for (int m = 0; m < C; ++m) {
            cplx s = 0.0;
            for (int r = 0; r < R; ++r)
                for (int c = 0; c < C; ++c) {
                    const int hr = ((n - r) % R + R) % R;
                    const int hc = ((m - c) % C + C) % C;
                    s += x.at(r, c) * h.at(hr, hc);
                }
            out.at(n, m) = std::norm(s * scale);
        }
    return out;
}

inline double total_energy(const ComplexField& f) {
    double s = 0.0;
    for (const cplx& v : f.values) s += std::norm(v);
    return s;
}

inline RealImage random_image(int rows, int cols, std::mt19937_64& rng, bool lattice8 = false) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    RealImage img(rows, cols);
    for (double& v : img.values) {
        v = dist(rng);
        if (lattice8) v = std::round(v * 255.0) / 255.0;
    }
    return img;
}

inline ComplexField random_field(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ComplexField f(rows, cols);
    for (cplx& v : f.values) v = cplx(dist(rng), dist(rng));
    return f;
}

inline double max_abs_diff(const RealImage& a, const RealImage& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

inline double max_magnitude(const RealImage& a) {
    double m = 0.0;
    for (double v : a.values) m = std::max(m, std::abs(v));
    return m;
}

/// Relative agreement in the max norm.
inline double rel_error(const RealImage& test, const RealImage& ref) {
    const double denom = std::max(max_magnitude(ref), 1e-300);
    return max_abs_diff(test, ref) / denom;
}

}  // namespace oracle
