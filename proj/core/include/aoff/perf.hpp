#pragma once

#include <string>
#include <vector>

namespace aoff {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Refresh/integration/path numbers feeding the latency model.
struct DeviceTiming {
    double dmd_refresh = 1031.0;  // Hz (8-bit); ~20 kHz in 1-bit mode
    double camera_rate = 1000.0;  // Hz, full frame at 8-bit
    double path_length = 0.8;     // meters, object to image plane (4 focal lengths)
    int bit_depth = 8;
};

struct LatencyBreakdown {
    double dmd = 0.0;     // seconds
    double camera = 0.0;  // seconds
    double tof = 0.0;     // seconds
    double total = 0.0;   // seconds
};

LatencyBreakdown latency_breakdown(const DeviceTiming& t);

/// MAC-equivalents per second of the optical engine against a
/// sliding-window space-domain convolution of two equally sized
/// matrices: (rows*cols)^2 multiply-accumulates per frame. One MAC
/// counts as one op; counting multiply and add separately would double
/// the figure.
double equivalent_throughput(int rows, int cols, double frame_rate);

/// Spatial-modulator survey entry for the size-speed-product figure of
/// merit.
struct TechnologyEntry {
    std::string name;
    double pixel_count = 0.0;
    double update_rate = 0.0;  // Hz
    std::string tech_class;    // carrier-doping, phase-change, MOEMS, ...
    bool placeholder = false;  // order-of-magnitude survey value
};

double size_speed_product(const TechnologyEntry& e);

/// One row of the plot-ready latency report.
struct LatencyCurvePoint {
    double resolution_px = 0.0;
    double latency_s = 0.0;
    std::string component;  // dmd | camera | tof | total
};

/// Latency components for a list of square-ish resolutions, assuming
/// rates scale inversely with pixel count relative to the base timing
/// (the camera readout is the resolution-dependent bottleneck).
std::vector<LatencyCurvePoint> latency_curve(const DeviceTiming& base, double base_pixels,
                                             const std::vector<double>& resolutions_px);

}  // namespace aoff
