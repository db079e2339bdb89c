#include <doctest.h>

#include <random>

#include "aoff/field_ops.hpp"
#include "oracles.hpp"

using namespace aoff;

TEST_CASE("dft2 of a unit impulse is the flat orthonormal spectrum") {
    ComplexField f(4, 4);
    f.at(0, 0) = 1.0;
    const ComplexField F = dft2(f);
    for (const cplx& v : F.values) {
        CHECK(v.real() == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("idft2 of the flat spectrum recovers the impulse") {
    ComplexField F(4, 4);
    for (cplx& v : F.values) v = 0.25;
    const ComplexField f = idft2(F);
    CHECK(std::abs(f.at(0, 0) - 1.0) < 1e-12);
    double off = 0.0;
    for (size_t i = 1; i < f.values.size(); ++i) off = std::max(off, std::abs(f.values[i]));
    CHECK(off < 1e-12);
}

TEST_CASE("transform round trip is lossless") {
    std::mt19937_64 rng(11);
    for (int n : {4, 16, 31}) {
        const ComplexField f = oracle::random_field(n, n, rng);
        const ComplexField g = idft2(dft2(f));
        double err = 0.0;
        for (size_t i = 0; i < f.values.size(); ++i)
            err = std::max(err, std::abs(f.values[i] - g.values[i]));
        CHECK(err < 1e-12);
    }
}

TEST_CASE("dft2 matches the brute-force transform") {
    std::mt19937_64 rng(12);
    const ComplexField f = oracle::random_field(8, 8, rng);
    const ComplexField fast = dft2(f);
    const ComplexField slow = oracle::brute_dft2(f);
    for (size_t i = 0; i < fast.values.size(); ++i)
        CHECK(std::abs(fast.values[i] - slow.values[i]) < 1e-10);
}

TEST_CASE("Parseval holds to 1e-12 relative") {
    std::mt19937_64 rng(13);
    for (int n : {8, 64, 256}) {
        const ComplexField f = oracle::random_field(n, n, rng);
        const double before = oracle::total_energy(f);
        const double after = oracle::total_energy(dft2(f));
        CHECK(std::abs(before - after) / before < 1e-12);
    }
}

TEST_CASE("dft2 is linear") {
    std::mt19937_64 rng(14);
    const ComplexField f = oracle::random_field(16, 16, rng);
    const ComplexField g = oracle::random_field(16, 16, rng);
    const cplx a(0.7, -0.2), b(-1.3, 0.4);
    ComplexField combo(16, 16);
    for (size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = a * f.values[i] + b * g.values[i];
    const ComplexField lhs = dft2(combo);
    const ComplexField F = dft2(f), G = dft2(g);
    double err = 0.0, scale = 0.0;
    for (size_t i = 0; i < lhs.values.size(); ++i) {
        err = std::max(err, std::abs(lhs.values[i] - (a * F.values[i] + b * G.values[i])));
        scale = std::max(scale, std::abs(lhs.values[i]));
    }
    CHECK(err / scale < 1e-12);
}

TEST_CASE("dft2 rejects non-finite input and wrong layout") {
    ComplexField f(4, 4);
    f.layout = FieldLayout::dc_at_center;
    CHECK_THROWS_AS(dft2(f), std::invalid_argument);
    ComplexField g(4, 4);
    g.at(1, 1) = cplx(std::nan(""), 0.0);
    CHECK_THROWS_AS(dft2(g), std::invalid_argument);
}

TEST_CASE("shift_layout moves the corner impulse to the centre") {
    ComplexField f(4, 4);
    f.at(0, 0) = 1.0;
    const ComplexField s = shift_layout(f);
    CHECK(s.layout == FieldLayout::dc_at_center);
    CHECK(std::abs(s.at(2, 2) - 1.0) < 1e-15);
    CHECK(std::abs(s.at(0, 0)) == 0.0);
}

TEST_CASE("shift_layout is involutive, odd dimensions included") {
    std::mt19937_64 rng(15);
    for (int n : {4, 5}) {
        const ComplexField f = oracle::random_field(n, n, rng);
        const ComplexField g = shift_layout(shift_layout(f));
        CHECK(g.layout == f.layout);
        for (size_t i = 0; i < f.values.size(); ++i) CHECK(f.values[i] == g.values[i]);
    }
}

TEST_CASE("shift_layout odd-dimension index map matches the explicit map") {
    // corner -> centre on 5x5: sample (0,0) must land on (2,2)
    ComplexField f(5, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) f.at(r, c) = cplx(r, c);
    const ComplexField s = shift_layout(f);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) CHECK(s.at((r + 2) % 5, (c + 2) % 5) == f.at(r, c));
}

TEST_CASE("zero_pad_center places a 28x28 digit at rows 90..117 of 208x208") {
    RealImage img(28, 28, 1.0);
    const RealImage padded = zero_pad_center(img, 208, 208);
    CHECK(padded.at(90, 90) == 1.0);
    CHECK(padded.at(117, 117) == 1.0);
    CHECK(padded.at(89, 90) == 0.0);
    CHECK(padded.at(118, 90) == 0.0);
    CHECK(padded.sum() == doctest::Approx(img.sum()));
}

TEST_CASE("zero_pad_center to the same size is the identity") {
    std::mt19937_64 rng(16);
    const RealImage img = oracle::random_image(9, 7, rng);
    const RealImage padded = zero_pad_center(img, 9, 7);
    CHECK(oracle::max_abs_diff(img, padded) == 0.0);
}

TEST_CASE("zero_pad_center rejects shrinking") {
    RealImage img(8, 8);
    CHECK_THROWS_AS(zero_pad_center(img, 4, 8), std::invalid_argument);
}

TEST_CASE("center_crop inverts zero_pad_center") {
    std::mt19937_64 rng(17);
    const RealImage img = oracle::random_image(28, 28, rng);
    const RealImage back = center_crop(zero_pad_center(img, 208, 208), 28, 28);
    CHECK(oracle::max_abs_diff(img, back) == 0.0);
}

TEST_CASE("expand_pixels replicates blocks") {
    RealImage img(208, 208, 0.5);
    const RealImage big = expand_pixels(img, 4);
    CHECK(big.rows == 832);
    CHECK(big.cols == 832);
    std::mt19937_64 rng(18);
    const RealImage r = oracle::random_image(6, 5, rng);
    const RealImage e = expand_pixels(r, 3);
    for (int i = 0; i < e.rows; ++i)
        for (int j = 0; j < e.cols; ++j) CHECK(e.at(i, j) == r.at(i / 3, j / 3));
    CHECK(expand_pixels(r, 1).values == r.values);
    CHECK(e.sum() / e.size() == doctest::Approx(r.sum() / r.size()));  // mean invariant
    CHECK_THROWS_AS(expand_pixels(r, 0), std::invalid_argument);
}

TEST_CASE("superpixel_reduce averages blocks") {
    RealImage ones(17, 17, 1.0);
    const RealImage r = superpixel_reduce(ones, 17);
    CHECK(r.rows == 1);
    CHECK(r.at(0, 0) == doctest::Approx(1.0));

    // 34x34 checkerboard, block 17 -> 2x2 of 0.5
    RealImage cb(34, 34);
    for (int i = 0; i < 34; ++i)
        for (int j = 0; j < 34; ++j) cb.at(i, j) = (i + j) % 2 ? 1.0 : 0.0;
    const RealImage rc = superpixel_reduce(cb, 17);
    CHECK(rc.rows == 2);
    for (double v : rc.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(superpixel_reduce(ones, 5), std::invalid_argument);
}

TEST_CASE("superpixel_reduce inverts expand_pixels exactly for factors 1..17") {
    std::mt19937_64 rng(19);
    const RealImage img = oracle::random_image(6, 6, rng);
    for (int f = 1; f <= 17; ++f) {
        const RealImage back = superpixel_reduce(expand_pixels(img, f), f);
        CHECK(oracle::max_abs_diff(img, back) < 1e-15);
    }
}

TEST_CASE("intensity is |amplitude|^2") {
    ComplexField f(2, 2);
    f.at(0, 0) = cplx(0.5, 0.5);
    f.at(0, 1) = cplx(1.0, 0.0);
    const RealImage I = intensity(f);
    CHECK(I.at(0, 0) == doctest::Approx(0.5));
    CHECK(I.at(0, 1) == doctest::Approx(1.0));
    CHECK(I.at(1, 1) == 0.0);
}

TEST_CASE("tile capacity of 208x208 tiles on the 1920x1080 plane is 45") {
    CHECK(tile_capacity(1920, 1080, 208, 208) == 45);
    std::vector<RealImage> tiles(45, RealImage(208, 208, 0.25));
    CHECK_NOTHROW(tile_images(tiles, 1920, 1080));
    tiles.emplace_back(208, 208, 0.25);
    try {
        tile_images(tiles, 1920, 1080);
        FAIL("expected capacity rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("45") != std::string::npos);
        CHECK(msg.find("46") != std::string::npos);
    }
}

TEST_CASE("single tile covering the canvas is an identity placement") {
    std::mt19937_64 rng(20);
    const RealImage img = oracle::random_image(16, 16, rng);
    auto [canvas, placements] = tile_images({img}, 16, 16);
    CHECK(placements.size() == 1);
    CHECK(placements[0].row == 0);
    CHECK(oracle::max_abs_diff(canvas, img) == 0.0);
}

TEST_CASE("tile/untile round trip is bit exact") {
    std::mt19937_64 rng(21);
    std::vector<RealImage> tiles;
    for (int i = 0; i < 7; ++i) tiles.push_back(oracle::random_image(13, 11, rng));
    auto [canvas, placements] = tile_images(tiles, 40, 37);
    const std::vector<RealImage> back = untile_images(canvas, placements);
    REQUIRE(back.size() == tiles.size());
    for (size_t i = 0; i < tiles.size(); ++i) CHECK(tiles[i].values == back[i].values);
}
