#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aoff {

using cplx = std::complex<double>;

/// Where the zero-frequency sample of a field lives on the grid.
/// Spectra come out of the transform with DC at index (0,0); physical
/// Fourier-plane masks are authored with DC on the optical axis, i.e.
/// at the grid centre.
enum class FieldLayout { dc_at_corner, dc_at_center };

/// Row-major real-valued raster. Pattern images (DMD inputs) live in
/// [0,1]; intensity images are nonnegative with arbitrary scale.
struct RealImage {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    RealImage() = default;
    RealImage(int r, int c, double fill = 0.0)
        : rows(r), cols(c), values(static_cast<size_t>(r) * c, fill) {
        if (r < 1 || c < 1) throw std::invalid_argument("RealImage: dims must be >= 1");
    }

    double& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return values.size(); }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
    bool in_unit_range() const {
        for (double v : values)
            if (v < 0.0 || v > 1.0) return false;
        return true;
    }
    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    double max_value() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, v);
        return m;
    }
    bool same_dims(const RealImage& o) const { return rows == o.rows && cols == o.cols; }
};

/// Row-major grid of complex amplitudes: the optical wavefront at any
/// plane of the system.
struct ComplexField {
    int rows = 0;
    int cols = 0;
    FieldLayout layout = FieldLayout::dc_at_corner;
    std::vector<cplx> values;

    ComplexField() = default;
    ComplexField(int r, int c, FieldLayout l = FieldLayout::dc_at_corner)
        : rows(r), cols(c), layout(l), values(static_cast<size_t>(r) * c) {
        if (r < 1 || c < 1) throw std::invalid_argument("ComplexField: dims must be >= 1");
    }

    cplx& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
    cplx at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return values.size(); }

    bool finite() const {
        for (const cplx& v : values)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
    double total_energy() const {
        double s = 0.0;
        for (const cplx& v : values) s += std::norm(v);
        return s;
    }
    bool same_dims(const ComplexField& o) const { return rows == o.rows && cols == o.cols; }
};

/// Lift a real pattern to a zero-phase complex field.
inline ComplexField to_field(const RealImage& img,
                             FieldLayout layout = FieldLayout::dc_at_corner) {
    ComplexField f(img.rows, img.cols, layout);
    for (size_t i = 0; i < img.values.size(); ++i) f.values[i] = cplx(img.values[i], 0.0);
    return f;
}

}  // namespace aoff
