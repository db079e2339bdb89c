#include "aoff/perf.hpp"

#include <stdexcept>

namespace aoff {

LatencyBreakdown latency_breakdown(const DeviceTiming& t) {
    if (t.dmd_refresh <= 0.0 || t.camera_rate <= 0.0 || t.path_length <= 0.0)
        throw std::invalid_argument("latency_breakdown: rates and path must be positive");
    LatencyBreakdown b;
    b.dmd = 1.0 / t.dmd_refresh;
    b.camera = 1.0 / t.camera_rate;
    b.tof = t.path_length / kSpeedOfLight;
    b.total = b.dmd + b.camera + b.tof;
    return b;
}

double equivalent_throughput(int rows, int cols, double frame_rate) {
    if (rows < 1 || cols < 1 || frame_rate <= 0.0)
        throw std::invalid_argument("equivalent_throughput: positive args required");
    const double px = static_cast<double>(rows) * cols;
    return px * px * frame_rate;
}

double size_speed_product(const TechnologyEntry& e) {
    if (e.pixel_count <= 0.0 || e.update_rate <= 0.0)
        throw std::invalid_argument("size_speed_product: positive values required");
    return e.pixel_count * e.update_rate;
}

std::vector<LatencyCurvePoint> latency_curve(const DeviceTiming& base, double base_pixels,
                                             const std::vector<double>& resolutions_px) {
    if (base_pixels <= 0.0) throw std::invalid_argument("latency_curve: base_pixels must be > 0");
    std::vector<LatencyCurvePoint> out;
    for (double px : resolutions_px) {
        DeviceTiming t = base;
        const double scale = px / base_pixels;
        t.dmd_refresh = base.dmd_refresh / scale;
        t.camera_rate = base.camera_rate / scale;
        const LatencyBreakdown b = latency_breakdown(t);
        out.push_back({px, b.dmd, "dmd"});
        out.push_back({px, b.camera, "camera"});
        out.push_back({px, b.tof, "tof"});
        out.push_back({px, b.total, "total"});
    }
    return out;
}

}  // namespace aoff
