#include "aoff/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aoff {

void DmdSpec::validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("dmd: grid dims must be >= 1");
    if (pixel_pitch <= 0.0) throw std::invalid_argument("dmd: pixel_pitch must be > 0");
    const double r = fill_factor();
    if (r <= 0.0 || r > 1.0) throw std::invalid_argument("dmd: fill factor must be in (0,1]");
    const double rc = hole_radius_norm();
    if (rc < 0.0 || rc >= r / 2.0)
        throw std::invalid_argument("dmd: hole radius must be in [0, fill/2)");
    if (tilt_angle < 0.0 || tilt_angle >= kPi / 2.0)
        throw std::invalid_argument("dmd: tilt_angle must be in [0, pi/2)");
    if (bit_depth != 1 && bit_depth != 2 && bit_depth != 8)
        throw std::invalid_argument("dmd: bit_depth must be 1, 2 or 8");
    if (contrast_ratio < 1.0) throw std::invalid_argument("dmd: contrast_ratio must be >= 1");
    if (refresh_rate <= 0.0) throw std::invalid_argument("dmd: refresh_rate must be > 0");
    if (subpixel_factor < 1) throw std::invalid_argument("dmd: subpixel_factor must be >= 1");
}

void LensSpec::validate() const {
    if (focal_length <= 0.0) throw std::invalid_argument("lens: focal_length must be > 0");
    if (pupil_radius <= 0.0) throw std::invalid_argument("lens: pupil_radius must be > 0");
}

void CameraSpec::validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("camera: grid dims must be >= 1");
    if (bit_depth < 1 || bit_depth > 16)
        throw std::invalid_argument("camera: bit_depth must be in [1,16]");
    if (frame_rate <= 0.0) throw std::invalid_argument("camera: frame_rate must be > 0");
    if (saturation_level <= 0.0)
        throw std::invalid_argument("camera: saturation_level must be > 0");
    if (noise_sigma < 0.0) throw std::invalid_argument("camera: noise_sigma must be >= 0");
}

void SystemConfig::validate() const {
    if (wavelength <= 0.0) throw std::invalid_argument("config: wavelength must be > 0");
    dmd1.validate();
    dmd2.validate();
    lens1.validate();
    lens2.validate();
    camera.validate();
}

double seidel_wavefront(const SeidelCoefficients& s, double u0, double x_hat, double y_hat) {
    const double r2 = x_hat * x_hat + y_hat * y_hat;
    return s.defocus * r2 + s.spherical * r2 * r2 + s.coma * u0 * r2 * x_hat +
           s.astigmatism * u0 * u0 * x_hat * x_hat + s.field_curvature * u0 * u0 * r2 +
           s.distortion * u0 * u0 * u0 * x_hat;
}

SystemConfig nominal_config() {
    SystemConfig cfg;
    cfg.lens1.seidel.spherical = 0.1;
    cfg.lens1.seidel.coma = 0.05;
    cfg.lens2.seidel = cfg.lens1.seidel;
    return cfg;
}

SystemConfig ideal_config() {
    SystemConfig cfg;
    for (DmdSpec* d : {&cfg.dmd1, &cfg.dmd2}) {
        d->tilt_angle = 0.0;
        d->inplane_rotation = 0.0;
        d->mirror_size = d->pixel_pitch;  // fill factor 1
        d->hole_diameter = 0.0;
        d->contrast_ratio = std::numeric_limits<double>::infinity();
        d->subpixel_factor = 1;
    }
    cfg.lens1.seidel = {};
    cfg.lens2.seidel = {};
    cfg.lens1.pupil_radius = 1.0;
    cfg.lens2.pupil_radius = 1.0;
    cfg.camera.noise_sigma = 0.0;
    cfg.camera.saturation_level = 1.0;
    return cfg;
}

ComplexField dmd_modulate(const RealImage& pattern, const DmdSpec& spec) {
    spec.validate();
    if (pattern.rows > spec.rows || pattern.cols > spec.cols)
        throw std::invalid_argument("dmd_modulate: pattern exceeds device grid " +
                                    std::to_string(spec.rows) + "x" + std::to_string(spec.cols));
    if (!pattern.in_unit_range())
        throw std::invalid_argument("dmd_modulate: pattern values must lie in [0,1]");

    const int s = spec.subpixel_factor;
    const double off = std::isinf(spec.contrast_ratio) ? 0.0 : 1.0 / spec.contrast_ratio;
    const double levels = static_cast<double>((1 << spec.bit_depth) - 1);
    const double fill_half = spec.fill_factor() * s / 2.0;
    const double hole_radius = spec.hole_radius_norm() * s;
    // A hole narrower than one subpixel is unresolvable at this sampling.
    const bool hole_resolved = hole_radius >= 0.5;
    const double centre = s / 2.0;

    // Per-axis subpixel classification within one pixel block. The
    // mirror spans the half-open centred interval so that a 16/17 fill
    // rasterizes to a 16-subpixel footprint with the gap on one side,
    // matching the one inter-mirror gap per pitch.
    std::vector<bool> on_axis(s);
    for (int i = 0; i < s; ++i) {
        const double c = i + 0.5 - centre;
        on_axis[i] = (c >= -fill_half) && (c < fill_half);
    }
    std::vector<std::vector<bool>> is_hole(s, std::vector<bool>(s, false));
    if (hole_resolved) {
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) {
                const double dr = i + 0.5 - centre;
                const double dc = j + 0.5 - centre;
                is_hole[i][j] = std::sqrt(dr * dr + dc * dc) < hole_radius;
            }
    }

    ComplexField out(pattern.rows * s, pattern.cols * s, FieldLayout::dc_at_corner);
    for (int r = 0; r < pattern.rows; ++r) {
        for (int c = 0; c < pattern.cols; ++c) {
            const double q = std::round(pattern.at(r, c) * levels) / levels;
            const double amp = off + (1.0 - off) * q;
            for (int i = 0; i < s; ++i) {
                if (!on_axis[i]) continue;
                cplx* row = &out.at(r * s + i, c * s);
                for (int j = 0; j < s; ++j) {
                    if (!on_axis[j] || is_hole[i][j]) continue;
                    row[j] = cplx(amp, 0.0);
                }
            }
        }
    }
    return out;
}

ComplexField tilt_phase(const ComplexField& field, const DmdSpec& spec, double wavelength,
                        double sign) {
    if (wavelength <= 0.0) throw std::invalid_argument("tilt_phase: wavelength must be > 0");
    if (spec.tilt_angle == 0.0) return field;
    const double sample_pitch = spec.pixel_pitch / spec.subpixel_factor;
    const double ar = std::sin(spec.inplane_rotation);
    const double ac = std::cos(spec.inplane_rotation);
    const double k_tilt = sign * std::sin(spec.tilt_angle) * 2.0 * kPi / wavelength;
    const double ci = (field.rows - 1) / 2.0;
    const double cj = (field.cols - 1) / 2.0;
    ComplexField out(field.rows, field.cols, field.layout);
    for (int r = 0; r < field.rows; ++r) {
        const double dr = (r - ci) * ar * sample_pitch;
        for (int c = 0; c < field.cols; ++c) {
            const double d = dr + (c - cj) * ac * sample_pitch;
            out.at(r, c) = field.at(r, c) * std::polar(1.0, -k_tilt * d);
        }
    }
    return out;
}

std::pair<double, double> tilt_cycles_per_sample(const DmdSpec& spec, double wavelength) {
    const double sample_pitch = spec.pixel_pitch / spec.subpixel_factor;
    const double f = std::sin(spec.tilt_angle) * sample_pitch / wavelength;
    return {f * std::sin(spec.inplane_rotation), f * std::cos(spec.inplane_rotation)};
}

ComplexField lens_transfer(const ComplexField& spectrum, const LensSpec& lens, double wavelength,
                           double sample_pitch, double u0) {
    if (spectrum.layout != FieldLayout::dc_at_center)
        throw std::invalid_argument("lens_transfer: spectrum must carry dc_at_center layout");
    lens.validate();
    const int R = spectrum.rows, C = spectrum.cols;
    // Frequency bin k maps to the physical Fourier-plane coordinate
    // lambda * f * k / (N * pitch); pupil coordinates are normalized to
    // the pupil radius.
    const double sr = wavelength * lens.focal_length /
                      (static_cast<double>(R) * sample_pitch * lens.pupil_radius);
    const double sc = wavelength * lens.focal_length /
                      (static_cast<double>(C) * sample_pitch * lens.pupil_radius);
    const double k_wave = 2.0 * kPi / wavelength;
    const bool flat = lens.seidel.all_zero();
    ComplexField out(R, C, FieldLayout::dc_at_center);
    for (int r = 0; r < R; ++r) {
        const double y_hat = (r - R / 2) * sr;
        for (int c = 0; c < C; ++c) {
            const double x_hat = (c - C / 2) * sc;
            if (x_hat * x_hat + y_hat * y_hat > 1.0) continue;  // outside the aperture
            if (flat) {
                out.at(r, c) = spectrum.at(r, c);
            } else {
                const double w = seidel_wavefront(lens.seidel, u0, x_hat, y_hat) * wavelength;
                out.at(r, c) = spectrum.at(r, c) * std::polar(1.0, -k_wave * w);
            }
        }
    }
    return out;
}

RealImage apply_camera(const RealImage& img, const CameraSpec& spec, std::mt19937_64* rng) {
    spec.validate();
    for (double v : img.values)
        if (v < 0.0) throw std::invalid_argument("apply_camera: negative intensity");
    const double sat = spec.saturation_level;
    const double levels = static_cast<double>((1 << spec.bit_depth) - 1);
    RealImage out(img.rows, img.cols);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma * sat);
    const bool noisy = rng != nullptr && spec.noise_sigma > 0.0;
    for (size_t i = 0; i < img.values.size(); ++i) {
        double v = img.values[i];
        if (noisy) v += noise(*rng);
        v = std::clamp(v, 0.0, sat);
        out.values[i] = std::round(v / sat * levels) / levels;
    }
    return out;
}

SystemConfig make_hardware_surrogate(const SystemConfig& config, uint64_t seed) {
    SystemConfig out = config;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> shift(-1.5, 1.5);
    std::uniform_real_distribution<double> rot(-degrees(0.3), degrees(0.3));
    std::uniform_real_distribution<double> freq(0.5, 1.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    PerturbationSpec& p = out.perturbations;
    p.mask_shift_x = shift(rng);
    p.mask_shift_y = shift(rng);
    p.rotation_error = rot(rng);
    p.illumination_amplitude = 0.05;
    p.illumination_freq_x = freq(rng);
    p.illumination_freq_y = freq(rng);
    p.illumination_phase = phase(rng);
    p.camera_noise_sigma = 0.01;
    p.camera_saturation_scale = 0.9;
    p.noise_seed = seed;
    return out;
}

RealImage rotate_bilinear(const RealImage& img, double angle) {
    if (angle == 0.0) return img;
    const double cr = (img.rows - 1) / 2.0;
    const double cc = (img.cols - 1) / 2.0;
    const double cs = std::cos(-angle), sn = std::sin(-angle);
    RealImage out(img.rows, img.cols, 0.0);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double dy = r - cr, dx = c - cc;
            const double sy = cr + dy * cs - dx * sn;
            const double sx = cc + dy * sn + dx * cs;
            const int r0 = static_cast<int>(std::floor(sy));
            const int c0 = static_cast<int>(std::floor(sx));
            if (r0 < 0 || c0 < 0 || r0 + 1 >= img.rows || c0 + 1 >= img.cols) continue;
            const double fr = sy - r0, fc = sx - c0;
            out.at(r, c) = img.at(r0, c0) * (1 - fr) * (1 - fc) +
                           img.at(r0, c0 + 1) * (1 - fr) * fc +
                           img.at(r0 + 1, c0) * fr * (1 - fc) + img.at(r0 + 1, c0 + 1) * fr * fc;
        }
    }
    return out;
}

RealImage rotate_bilinear_adjoint(const RealImage& grad, double angle) {
    if (angle == 0.0) return grad;
    const double cr = (grad.rows - 1) / 2.0;
    const double cc = (grad.cols - 1) / 2.0;
    const double cs = std::cos(-angle), sn = std::sin(-angle);
    RealImage out(grad.rows, grad.cols, 0.0);
    for (int r = 0; r < grad.rows; ++r) {
        for (int c = 0; c < grad.cols; ++c) {
            const double g = grad.at(r, c);
            if (g == 0.0) continue;
            const double dy = r - cr, dx = c - cc;
            const double sy = cr + dy * cs - dx * sn;
            const double sx = cc + dy * sn + dx * cs;
            const int r0 = static_cast<int>(std::floor(sy));
            const int c0 = static_cast<int>(std::floor(sx));
            if (r0 < 0 || c0 < 0 || r0 + 1 >= grad.rows || c0 + 1 >= grad.cols) continue;
            const double fr = sy - r0, fc = sx - c0;
            out.at(r0, c0) += g * (1 - fr) * (1 - fc);
            out.at(r0, c0 + 1) += g * (1 - fr) * fc;
            out.at(r0 + 1, c0) += g * fr * (1 - fc);
            out.at(r0 + 1, c0 + 1) += g * fr * fc;
        }
    }
    return out;
}

ComplexField shift_field_subpixel(const ComplexField& field, double dr, double dc) {
    if (dr == 0.0 && dc == 0.0) return field;
    ComplexField work = field;
    const bool centred = field.layout == FieldLayout::dc_at_center;
    if (centred) work = shift_layout(work);
    ComplexField spec = dft2(work);
    const int R = spec.rows, C = spec.cols;
    for (int r = 0; r < R; ++r) {
        const int kr = r < (R + 1) / 2 ? r : r - R;
        for (int c = 0; c < C; ++c) {
            const int kc = c < (C + 1) / 2 ? c : c - C;
            const double ph = -2.0 * kPi * (kr * dr / R + kc * dc / C);
            spec.at(r, c) *= std::polar(1.0, ph);
        }
    }
    ComplexField out = idft2(spec);
    if (centred) out = shift_layout(out);
    out.layout = field.layout;
    return out;
}

namespace {

ComplexField roll_field(const ComplexField& field, int dr, int dc) {
    const int R = field.rows, C = field.cols;
    dr = ((dr % R) + R) % R;
    dc = ((dc % C) + C) % C;
    if (dr == 0 && dc == 0) return field;
    ComplexField out(R, C, field.layout);
    for (int r = 0; r < R; ++r) {
        const int rr = (r + dr) % R;
        for (int c = 0; c < C; ++c) out.at(rr, (c + dc) % C) = field.at(r, c);
    }
    return out;
}

}  // namespace

Propagator::Propagator(const SystemConfig& config, const RealImage& fourier_mask) : cfg_(config) {
    cfg_.validate();
    const PerturbationSpec& pert = cfg_.perturbations;

    RealImage mask = rotate_bilinear(fourier_mask, pert.rotation_error);
    for (double& v : mask.values) v = std::clamp(v, 0.0, 1.0);
    ComplexField mask_field = dmd_modulate(mask, cfg_.dmd2);
    // Fourier-plane masks are authored dc_at_center: the pattern centre
    // sits on the optical axis.
    mask_field.layout = FieldLayout::dc_at_center;
    const int s2 = cfg_.dmd2.subpixel_factor;
    if (pert.mask_shift_x != 0.0 || pert.mask_shift_y != 0.0)
        mask_field =
            shift_field_subpixel(mask_field, pert.mask_shift_y * s2, pert.mask_shift_x * s2);

    grid_rows_ = mask_field.rows;
    grid_cols_ = mask_field.cols;

    const double sample_pitch = cfg_.dmd1.pixel_pitch / cfg_.dmd1.subpixel_factor;
    ComplexField mult = lens_transfer(mask_field, cfg_.lens1, cfg_.wavelength, sample_pitch);
    plane_mult_ = lens_transfer(mult, cfg_.lens2, cfg_.wavelength, sample_pitch);

    // The bench is aligned to the beam reflected off the tilted DMD:
    // the integer part of the tilt-induced spectral shift is absorbed,
    // the fractional residue stays as genuine misalignment.
    const auto [fr, fc] = tilt_cycles_per_sample(cfg_.dmd1, cfg_.wavelength);
    roll_r_ = static_cast<int>(std::lround(fr * grid_rows_));
    roll_c_ = static_cast<int>(std::lround(fc * grid_cols_));
}

ComplexField Propagator::input_spectrum(const RealImage& input) const {
    const int s1 = cfg_.dmd1.subpixel_factor;
    if (input.rows * s1 != grid_rows_ || input.cols * s1 != grid_cols_)
        throw std::invalid_argument(
            "propagate_4f: expanded input spectrum " + std::to_string(input.rows * s1) + "x" +
            std::to_string(input.cols * s1) + " does not match expanded mask " +
            std::to_string(grid_rows_) + "x" + std::to_string(grid_cols_));
    ComplexField field = dmd_modulate(input, cfg_.dmd1);
    const PerturbationSpec& pert = cfg_.perturbations;
    if (pert.illumination_amplitude != 0.0) {
        const double a = pert.illumination_amplitude / 2.0;
        for (int r = 0; r < field.rows; ++r) {
            const double v = static_cast<double>(r) / field.rows;
            for (int c = 0; c < field.cols; ++c) {
                const double u = static_cast<double>(c) / field.cols;
                const double gain =
                    1.0 + a * std::sin(2.0 * kPi * (pert.illumination_freq_x * u +
                                                    pert.illumination_freq_y * v) +
                                       pert.illumination_phase);
                field.at(r, c) *= gain;
            }
        }
    }
    field = tilt_phase(field, cfg_.dmd1, cfg_.wavelength, 1.0);
    ComplexField spec = shift_layout(dft2(field));
    return roll_field(spec, roll_r_, roll_c_);
}

RealImage Propagator::detect(ComplexField spectrum, const PropagateOptions& opts) const {
    spectrum = shift_layout(spectrum);
    // The second lens performs another forward transform; with the
    // orthonormal kernel that equals the inverse transform of the same
    // spectrum with both axes flipped, so the reoriented output is
    // simply idft2.
    ComplexField image;
    if (opts.reorient) {
        image = idft2(spectrum);
    } else {
        image = dft2(spectrum);
    }
    image = tilt_phase(image, cfg_.dmd2, cfg_.wavelength, -1.0);
    RealImage img = intensity(image);
    img = superpixel_reduce(img, cfg_.dmd1.subpixel_factor);
    if (!opts.apply_camera) return img;

    CameraSpec cam = cfg_.camera;
    const PerturbationSpec& pert = cfg_.perturbations;
    if (opts.saturation > 0.0) cam.saturation_level = opts.saturation;
    if (pert.camera_saturation_scale) cam.saturation_level *= *pert.camera_saturation_scale;
    if (pert.camera_noise_sigma) cam.noise_sigma = *pert.camera_noise_sigma;
    std::mt19937_64 rng(pert.noise_seed + 0x9E3779B97F4A7C15ull * (opts.frame_seed + 1));
    return apply_camera(img, cam, &rng);
}

RealImage Propagator::run(const RealImage& input, const PropagateOptions& opts) const {
    ComplexField spec = input_spectrum(input);
    for (size_t i = 0; i < spec.values.size(); ++i) spec.values[i] *= plane_mult_.values[i];
    return detect(std::move(spec), opts);
}

RealImage propagate_4f(const RealImage& input_pattern, const RealImage& fourier_mask,
                       const SystemConfig& config, const PropagateOptions& opts) {
    return Propagator(config, fourier_mask).run(input_pattern, opts);
}

}  // namespace aoff
