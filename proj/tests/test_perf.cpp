#include <doctest.h>

#include "aoff/perf.hpp"

using namespace aoff;

TEST_CASE("latency breakdown at the 8-bit defaults") {
    DeviceTiming t;  // 1031 Hz DMD, 1000 fps camera, 0.8 m path
    const LatencyBreakdown b = latency_breakdown(t);
    CHECK(b.dmd == doctest::Approx(0.970e-3).epsilon(1e-3));
    CHECK(b.camera == doctest::Approx(1.0e-3));
    CHECK(b.tof == doctest::Approx(0.8 / kSpeedOfLight));
    CHECK(b.total > 1.9e-3);
    CHECK(b.total < 2.1e-3);
    CHECK(b.camera >= b.dmd);
    CHECK(b.dmd >= b.tof);
}

TEST_CASE("1-bit mode reaches the 100 microsecond latency") {
    DeviceTiming t;
    t.dmd_refresh = 20000.0;
    t.camera_rate = 20000.0;
    t.bit_depth = 1;
    const LatencyBreakdown b = latency_breakdown(t);
    CHECK(std::abs(b.total - 100e-6) < 1e-6);
}

TEST_CASE("with infinite rates only the time of flight remains") {
    DeviceTiming t;
    t.dmd_refresh = 1e18;
    t.camera_rate = 1e18;
    const LatencyBreakdown b = latency_breakdown(t);
    CHECK(b.total == doctest::Approx(b.tof).epsilon(1e-9));
}

TEST_CASE("latency total strictly decreases when any rate increases") {
    DeviceTiming t;
    const double base = latency_breakdown(t).total;
    DeviceTiming faster_dmd = t;
    faster_dmd.dmd_refresh *= 2;
    DeviceTiming faster_cam = t;
    faster_cam.camera_rate *= 2;
    CHECK(latency_breakdown(faster_dmd).total < base);
    CHECK(latency_breakdown(faster_cam).total < base);
}

TEST_CASE("time of flight is a negligible share for the shipped full-frame preset") {
    DeviceTiming t;
    const LatencyBreakdown b = latency_breakdown(t);
    CHECK(b.tof / b.total < 1e-5);
}

TEST_CASE("equivalent throughput reproduces the peta-ops figure") {
    const double ops = equivalent_throughput(1920, 1080, 1031.0);
    CHECK(ops > 4.0e15);
    CHECK(ops < 4.6e15);
    CHECK(equivalent_throughput(1, 1, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("doubling the resolution per axis multiplies throughput by 16") {
    const double base = equivalent_throughput(1920, 1080, 1031.0);
    const double quad = equivalent_throughput(3840, 2160, 1031.0);
    CHECK(quad / base == doctest::Approx(16.0));
    // and it is multiplicative in the frame rate
    CHECK(equivalent_throughput(1920, 1080, 2062.0) / base == doctest::Approx(2.0));
}

TEST_CASE("size-speed product") {
    TechnologyEntry dlp{"DLP9000 (1-bit)", 2.0736e6, 20000.0, "MOEMS", false};
    CHECK(size_speed_product(dlp) == doctest::Approx(4.1472e10));
    TechnologyEntry unit{"unit", 1.0, 1.0, "MOEMS", false};
    CHECK(size_speed_product(unit) == doctest::Approx(1.0));
    TechnologyEntry other{"other", 2.0736e10, 2.0, "LCOS", false};
    CHECK(size_speed_product(other) == doctest::Approx(size_speed_product(dlp)));  // same iso-line
}

TEST_CASE("latency curve covers all components per resolution") {
    DeviceTiming t;
    const auto curve = latency_curve(t, 1920.0 * 1080.0, {0.5e6, 2.0736e6, 8.3e6});
    CHECK(curve.size() == 12);
    for (size_t i = 0; i < curve.size(); i += 4) {
        CHECK(curve[i].component == "dmd");
        CHECK(curve[i + 3].component == "total");
        CHECK(curve[i + 3].latency_s ==
              doctest::Approx(curve[i].latency_s + curve[i + 1].latency_s + curve[i + 2].latency_s));
    }
}
