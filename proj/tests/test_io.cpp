#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "aoff/io.hpp"
#include "oracles.hpp"

using namespace aoff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("aoff_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void put_be32(std::string& s, uint32_t v) {
    s.push_back(char((v >> 24) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char(v & 0xff));
}

/// Minimal well-formed IDX pair: n images of rows x cols plus labels.
void write_idx_pair(const TempDir& dir, int n, int rows, int cols, bool train = true,
                    uint32_t img_magic = 0x803, uint32_t lbl_magic = 0x801, int truncate_img = 0,
                    int label_count_delta = 0, int truncate_lbl = 0) {
    std::string img;
    put_be32(img, img_magic);
    put_be32(img, n);
    put_be32(img, rows);
    put_be32(img, cols);
    for (int i = 0; i < n * rows * cols; ++i) img.push_back(char((i * 7) % 256));
    if (truncate_img > 0) img.resize(img.size() - truncate_img);
    write_text_file(dir.file(train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte"), img);

    std::string lbl;
    put_be32(lbl, lbl_magic);
    put_be32(lbl, n + label_count_delta);
    for (int i = 0; i < n + label_count_delta; ++i) lbl.push_back(char(i % 10));
    if (truncate_lbl > 0) lbl.resize(lbl.size() - truncate_lbl);
    write_text_file(dir.file(train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte"), lbl);
}

std::string cifar_record(uint8_t label) {
    std::string rec(3073, '\0');
    rec[0] = char(label);
    for (int i = 1; i < 3073; ++i) rec[i] = char((i * 3) % 256);
    return rec;
}

}  // namespace

TEST_CASE("well-formed IDX pair parses with normalized pixels") {
    TempDir dir;
    write_idx_pair(dir, 5, 4, 3);
    const LabeledImages set = load_mnist(dir.path.string(), true);
    CHECK(set.count() == 5);
    CHECK(set.rows == 4);
    CHECK(set.cols == 3);
    CHECK(set.channels == 1);
    // byte 255 maps to exactly 1.0
    bool saw_byte = false;
    for (float v : set.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        saw_byte = true;
    }
    CHECK(saw_byte);
    CHECK(set.labels[3] == 3);
}

TEST_CASE("mutated IDX and CIFAR corpora are rejected with typed errors") {
    // 1. bad image magic
    {
        TempDir dir;
        write_idx_pair(dir, 2, 4, 4, true, 0x804);
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 2. bad label magic
    {
        TempDir dir;
        write_idx_pair(dir, 2, 4, 4, true, 0x803, 0x802);
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 3. truncated image payload
    {
        TempDir dir;
        write_idx_pair(dir, 2, 4, 4, true, 0x803, 0x801, 5);
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 4. truncated label payload
    {
        TempDir dir;
        write_idx_pair(dir, 2, 4, 4, true, 0x803, 0x801, 0, 0, 1);
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 5. image/label count mismatch
    {
        TempDir dir;
        write_idx_pair(dir, 2, 4, 4, true, 0x803, 0x801, 0, 1);
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 6. truncated image header
    {
        TempDir dir;
        write_text_file(dir.file("train-images-idx3-ubyte"), "\x00\x00\x08");
        write_idx_pair(dir, 2, 4, 4, true);  // rewrites both, then damage images
        write_text_file(dir.file("train-images-idx3-ubyte"), std::string("\x00\x00", 2));
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 7. missing file
    {
        TempDir dir;
        CHECK_THROWS_AS(load_mnist(dir.path.string()), ParseError);
    }
    // 8. CIFAR length not a multiple of 3073
    {
        TempDir dir;
        write_text_file(dir.file("test_batch.bin"), cifar_record(1) + "xx");
        CHECK_THROWS_AS(load_cifar10(dir.path.string(), false), ParseError);
    }
    // 9. CIFAR label out of range
    {
        TempDir dir;
        write_text_file(dir.file("test_batch.bin"), cifar_record(4) + cifar_record(10));
        CHECK_THROWS_AS(load_cifar10(dir.path.string(), false), ParseError);
    }
    // 10. CIFAR empty batch file
    {
        TempDir dir;
        write_text_file(dir.file("test_batch.bin"), "");
        CHECK_THROWS_AS(load_cifar10(dir.path.string(), false), ParseError);
    }
}

TEST_CASE("CIFAR batch parses channel-planar records") {
    TempDir dir;
    std::string batch;
    for (int i = 0; i < 4; ++i) batch += cifar_record(uint8_t(i % 10));
    write_text_file(dir.file("test_batch.bin"), batch);
    const LabeledImages set = load_cifar10(dir.path.string(), false);
    CHECK(set.count() == 4);
    CHECK(set.channels == 3);
    CHECK(set.rows == 32);
    // plane order preserved: first payload byte of sample 0, channel 0
    CHECK(set.pixels[0] == doctest::Approx(3.0 / 255.0));
}

TEST_CASE("split and subset are deterministic") {
    TempDir dir;
    write_idx_pair(dir, 50, 4, 4);
    const LabeledImages set = load_mnist(dir.path.string());
    auto [tr1, va1] = split_train_val(set, 10, 99);
    auto [tr2, va2] = split_train_val(set, 10, 99);
    CHECK(tr1.labels == tr2.labels);
    CHECK(va1.labels == va2.labels);
    CHECK(tr1.count() == 40);
    CHECK(va1.count() == 10);
    const LabeledImages sub = take_subset(set, 12, 5);
    CHECK(sub.count() == 12);
    CHECK_THROWS_AS(take_subset(set, 51, 5), std::invalid_argument);
}

TEST_CASE("raster round trip is bit exact") {
    TempDir dir;
    std::mt19937_64 rng(41);
    RasterFile r;
    r.rows = 13;
    r.cols = 7;
    r.channels = 3;
    std::uniform_real_distribution<float> dist(-5.0f, 5.0f);
    r.payload.resize(13 * 7 * 3);
    for (float& v : r.payload) v = dist(rng);
    write_raster(dir.file("t.aoff"), r);
    const RasterFile back = read_raster(dir.file("t.aoff"));
    CHECK(back.rows == r.rows);
    CHECK(back.cols == r.cols);
    CHECK(back.channels == r.channels);
    CHECK(std::memcmp(back.payload.data(), r.payload.data(), r.payload.size() * 4) == 0);
}

TEST_CASE("raster rejects bad magic, version and length") {
    TempDir dir;
    RasterFile r;
    r.rows = 2;
    r.cols = 2;
    r.channels = 1;
    r.payload = {1, 2, 3, 4};
    write_raster(dir.file("t.aoff"), r);
    std::string bytes = read_text_file(dir.file("t.aoff"));

    std::string bad = bytes;
    bad[0] = 'B';
    write_text_file(dir.file("bad_magic.aoff"), bad);
    CHECK_THROWS_AS(read_raster(dir.file("bad_magic.aoff")), ParseError);

    bad = bytes;
    bad[4] = 9;
    write_text_file(dir.file("bad_version.aoff"), bad);
    CHECK_THROWS_AS(read_raster(dir.file("bad_version.aoff")), ParseError);

    bad = bytes.substr(0, bytes.size() - 2);
    write_text_file(dir.file("short.aoff"), bad);
    CHECK_THROWS_AS(read_raster(dir.file("short.aoff")), ParseError);
}

TEST_CASE("pgm writes the exact P5 header and 8-bit payload") {
    TempDir dir;
    RealImage img(3, 5, 0.5);
    write_pgm(dir.file("t.pgm"), img);
    const std::string bytes = read_text_file(dir.file("t.pgm"));
    CHECK(bytes.substr(0, 9) == "P5\n5 3\n255");
    for (size_t i = 10; i < bytes.size(); ++i)
        CHECK(static_cast<unsigned char>(bytes[i]) == 128);  // round(0.5*255)
    const RealImage back = read_pgm(dir.file("t.pgm"));
    CHECK(back.rows == 3);
    CHECK(back.cols == 5);
    for (double v : back.values) CHECK(v == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("empty config object yields the bench defaults") {
    const SystemConfig cfg = system_config_from_json("{}");
    CHECK(cfg.wavelength == doctest::Approx(633e-9));
    CHECK(cfg.dmd1.pixel_pitch == doctest::Approx(17e-6));
    CHECK(cfg.dmd1.tilt_angle == doctest::Approx(degrees(22.5)));
    CHECK(cfg.dmd1.fill_factor() == doctest::Approx(16.0 / 17.0));
    CHECK(cfg.dmd1.hole_radius_norm() == doctest::Approx(0.5 / 17.0));
    CHECK(cfg.dmd1.refresh_rate == doctest::Approx(1031.0));
    CHECK(cfg.camera.frame_rate == doctest::Approx(1000.0));
}

TEST_CASE("config rejects unknown keys with their path") {
    try {
        system_config_from_json(R"({"dmd1": {"tilt_angel": 0.1}})");
        FAIL("expected rejection");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("dmd1.tilt_angel") != std::string::npos);
    }
}

TEST_CASE("config reports invariant violations with the field") {
    try {
        system_config_from_json(R"({"dmd1": {"tilt_angle": -1}})");
        FAIL("expected rejection");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("tilt_angle") != std::string::npos);
    }
}

TEST_CASE("wavelength parses in meters and round trips through JSON") {
    const SystemConfig cfg = system_config_from_json(R"({"wavelength": 633e-9})");
    CHECK(cfg.wavelength == doctest::Approx(633e-9));
    const SystemConfig back = system_config_from_json(system_config_to_json(cfg));
    CHECK(back.wavelength == doctest::Approx(cfg.wavelength));
    CHECK(back.dmd1.subpixel_factor == cfg.dmd1.subpixel_factor);
}

TEST_CASE("technology table parses and validates") {
    const auto table = technology_table_from_json(
        R"([{"name": "x", "pixel_count": 100, "update_rate": 50, "class": "MOEMS"}])");
    CHECK(table.size() == 1);
    CHECK(size_speed_product(table[0]) == doctest::Approx(5000.0));
    CHECK_THROWS_AS(
        technology_table_from_json(R"([{"name": "x", "pixel_count": -1, "update_rate": 5}])"),
        ValidationError);
    CHECK(!default_technology_table().empty());
}

TEST_CASE("loaded datasets hash stably") {
    TempDir dir;
    write_idx_pair(dir, 8, 4, 4);
    const LabeledImages a = load_mnist(dir.path.string());
    const LabeledImages b = load_mnist(dir.path.string());
    CHECK(fnv1a(a.pixels.data(), a.pixels.size() * 4) == fnv1a(b.pixels.data(), b.pixels.size() * 4));
}
