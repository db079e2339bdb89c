#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "aoff/field_ops.hpp"
#include "aoff/image.hpp"

namespace aoff {

inline constexpr double kPi = 3.14159265358979323846;

inline double degrees(double deg) { return deg * kPi / 180.0; }

/// Micromirror array geometry and drive parameters. The magnitude
/// transfer function rasterizes each pixel into subpixel_factor^2
/// samples: a centred mirror footprint of the fill-factor fraction, an
/// etched hinge hole, and the inter-mirror gap.
struct DmdSpec {
    int rows = 1080;
    int cols = 1920;
    double pixel_pitch = 17e-6;   // meters
    double mirror_size = 16e-6;   // meters
    double hole_diameter = 1e-6;  // meters
    double tilt_angle = degrees(22.5);
    double inplane_rotation = degrees(45.0);
    int bit_depth = 8;             // 1, 2 or 8
    double contrast_ratio = 2000;  // ON/OFF amplitude ratio; may be +inf
    double refresh_rate = 1031.0;  // Hz (20000 in 1-bit mode)
    int subpixel_factor = 17;

    double fill_factor() const { return mirror_size / pixel_pitch; }
    double hole_radius_norm() const { return 0.5 * hole_diameter / pixel_pitch; }
    void validate() const;
};

/// Third-order wavefront error coefficients, in waves.
struct SeidelCoefficients {
    double defocus = 0.0;          // W_d
    double spherical = 0.0;        // W_040
    double coma = 0.0;             // W_131
    double astigmatism = 0.0;      // W_222
    double field_curvature = 0.0;  // W_220
    double distortion = 0.0;       // W_311

    bool all_zero() const {
        return defocus == 0 && spherical == 0 && coma == 0 && astigmatism == 0 &&
               field_curvature == 0 && distortion == 0;
    }
};

/// Wavefront error polynomial at pupil coordinates normalized to the
/// pupil radius; u0 is the normalized image height (0 on axis).
double seidel_wavefront(const SeidelCoefficients& s, double u0, double x_hat, double y_hat);

struct LensSpec {
    double focal_length = 0.2;  // meters
    double pupil_radius = 0.1;  // meters
    SeidelCoefficients seidel;
    void validate() const;
};

struct CameraSpec {
    int rows = 1080;
    int cols = 1920;
    int bit_depth = 8;
    double frame_rate = 1000.0;      // Hz
    double saturation_level = 1.0;   // intensity mapped to full scale
    double noise_sigma = 0.0;        // std. as a fraction of full scale
    void validate() const;
};

/// Deviations of the bench from its nominal alignment. All-zeros is
/// the nominal system. The illumination profile is a smooth sinusoidal
/// gain with the given peak-to-peak amplitude.
struct PerturbationSpec {
    double mask_shift_x = 0.0;  // mask pixels, applied to the Fourier-plane mask
    double mask_shift_y = 0.0;
    double rotation_error = 0.0;          // radians
    double illumination_amplitude = 0.0;  // peak-to-peak fraction of gain
    double illumination_freq_x = 1.0;     // cycles across the aperture
    double illumination_freq_y = 0.5;
    double illumination_phase = 0.0;
    std::optional<double> camera_noise_sigma;       // overrides CameraSpec
    std::optional<double> camera_saturation_scale;  // multiplies the calibrated level
    uint64_t noise_seed = 0;

    bool is_nominal() const {
        return mask_shift_x == 0 && mask_shift_y == 0 && rotation_error == 0 &&
               illumination_amplitude == 0 && !camera_noise_sigma && !camera_saturation_scale;
    }
};

struct SystemConfig {
    double wavelength = 633e-9;  // meters, HeNe line
    DmdSpec dmd1;
    DmdSpec dmd2;
    LensSpec lens1;
    LensSpec lens2;
    CameraSpec camera;
    PerturbationSpec perturbations;
    void validate() const;
};

/// Nominal bench: full MTF, 22.5 degree tilt, mild spherical/coma
/// preset on both lenses, 8-bit camera, no perturbations.
SystemConfig nominal_config();

/// Degenerate bench used by the oracle-equivalence tests: no tilt, no
/// aberrations, unit fill factor, no hole, infinite contrast,
/// subpixel factor 1.
SystemConfig ideal_config();

/// Render a pattern through the DMD magnitude transfer function at
/// subpixel resolution. Mirror-footprint samples carry
/// OFF + (1-OFF) * graylevel with OFF = 1/contrast_ratio; gap and
/// hinge-hole samples carry zero. Graylevels are quantized to the
/// device bit depth. Phase is zero everywhere (amplitude-only device).
ComplexField dmd_modulate(const RealImage& pattern, const DmdSpec& spec);

/// Elementwise phase exp(-i * sign * sin(tilt) * d * 2*pi/lambda) where
/// d is the signed distance of the sample from the array centre along
/// the in-plane-rotated tilt axis. sign=-1 gives the second DMD's
/// opposite correction.
ComplexField tilt_phase(const ComplexField& field, const DmdSpec& spec, double wavelength,
                        double sign = 1.0);

/// Cycles-per-sample of the tilt-induced linear phase along (rows,
/// cols); the bench alignment cancels the integer part of the
/// resulting spectral shift.
std::pair<double, double> tilt_cycles_per_sample(const DmdSpec& spec, double wavelength);

/// Multiply a centred spectrum by the pupil transfer H = A * exp(-ikW):
/// hard circular aperture plus the Seidel phase. sample_pitch is the
/// object-plane sampling interval that fixes the frequency axes.
ComplexField lens_transfer(const ComplexField& spectrum, const LensSpec& lens, double wavelength,
                           double sample_pitch, double u0 = 0.0);

/// Detection: optional additive Gaussian noise, clip at the saturation
/// level, quantize to the sensor bit depth, rescale to [0,1]. Noise std
/// is noise_sigma * saturation_level (a fraction of full scale).
RealImage apply_camera(const RealImage& img, const CameraSpec& spec,
                       std::mt19937_64* rng = nullptr);

/// Seeded stand-in for the physical bench: draws mask shift within
/// +/-1.5 mask pixels, rotation within +/-0.3 degrees, 5% peak-to-peak
/// illumination gain, camera noise 0.01 and saturation scale 0.9.
SystemConfig make_hardware_surrogate(const SystemConfig& config, uint64_t seed);

/// Rotate about the image centre with bilinear sampling, zeros outside.
RealImage rotate_bilinear(const RealImage& img, double angle);
/// Transpose of rotate_bilinear (scatter with the same weights).
RealImage rotate_bilinear_adjoint(const RealImage& grad, double angle);

/// Displace a field by a possibly fractional number of samples via a
/// linear phase ramp in the conjugate domain; exact for band-limited
/// fields, unitary, inverse is the opposite shift.
ComplexField shift_field_subpixel(const ComplexField& field, double dr, double dc);

struct PropagateOptions {
    bool apply_camera = true;  // false returns raw superpixel intensity
    bool reorient = true;      // false keeps the flipped-axes image
    uint64_t frame_seed = 0;   // camera noise stream for this frame
    /// Saturation override in raw-intensity units (exposure
    /// calibration); <=0 keeps CameraSpec.saturation_level.
    double saturation = 0.0;
};

/// One pass through the 4f engine with per-mask state (modulated,
/// perturbed mask and both lens transfers folded into one Fourier-plane
/// multiplier). Reusable across frames; a batch can run() concurrently.
class Propagator {
  public:
    Propagator(const SystemConfig& config, const RealImage& fourier_mask);

    /// Camera image at DMD-pixel resolution (input orientation).
    RealImage run(const RealImage& input, const PropagateOptions& opts = {}) const;

    int grid_rows() const { return grid_rows_; }
    int grid_cols() const { return grid_cols_; }
    const ComplexField& fourier_multiplier() const { return plane_mult_; }
    const SystemConfig& config() const { return cfg_; }

    /// Input-side stage: modulate, illuminate, tilt, transform, centre,
    /// align. Exposed so a kernel bank can share it across masks.
    ComplexField input_spectrum(const RealImage& input) const;

    /// Output-side stage from a centred, mask-multiplied spectrum.
    RealImage detect(ComplexField spectrum, const PropagateOptions& opts) const;

  private:
    SystemConfig cfg_;
    ComplexField plane_mult_;  // dc_at_center, mask x H1 x H2
    int grid_rows_ = 0, grid_cols_ = 0;
    int roll_r_ = 0, roll_c_ = 0;  // alignment of the tilted beam
};

/// Full amplitude-only 4f pipeline: DMD modulation, tilt phase, lens 1,
/// Fourier-plane mask under the configured perturbations, lens 2,
/// inverse transform, opposite tilt correction, detection. The returned
/// image is reoriented to the input frame.
RealImage propagate_4f(const RealImage& input_pattern, const RealImage& fourier_mask,
                       const SystemConfig& config, const PropagateOptions& opts = {});

}  // namespace aoff
