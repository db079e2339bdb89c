#include <doctest.h>

#include <random>

#include "aoff/metrics.hpp"
#include "oracles.hpp"

using namespace aoff;

TEST_CASE("ssim of an image with itself is 1") {
    std::mt19937_64 rng(31);
    const RealImage a = oracle::random_image(24, 24, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of a checkerboard against its inverse is negative") {
    RealImage a(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) a.at(r, c) = (r + c) % 2 ? 1.0 : 0.0;
    RealImage b = a;
    for (double& v : b.values) v = 1.0 - v;
    CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim is symmetric") {
    std::mt19937_64 rng(32);
    const RealImage a = oracle::random_image(20, 20, rng);
    const RealImage b = oracle::random_image(20, 20, rng);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim under a common constant shift") {
    std::mt19937_64 rng(33);
    const RealImage a = oracle::random_image(20, 20, rng);

    // identical images stay at exactly 1 under any common shift
    RealImage a_shift = a;
    for (double& v : a_shift.values) v += 0.2;
    CHECK(ssim(a_shift, a_shift) == doctest::Approx(1.0).epsilon(1e-12));

    // near-identical pair: the luminance term reacts only at second
    // order in the (small) mean difference
    RealImage b = a;
    std::uniform_real_distribution<double> noise(-0.02, 0.02);
    for (double& v : b.values) v += noise(rng);
    RealImage b_shift = b;
    for (double& v : b_shift.values) v += 0.2;
    CHECK(std::abs(ssim(a_shift, b_shift) - ssim(a, b)) < 1e-4);
}

TEST_CASE("ssim rejects dimension mismatch") {
    RealImage a(16, 16), b(16, 17);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
}

TEST_CASE("rmse basics") {
    std::mt19937_64 rng(34);
    const RealImage a = oracle::random_image(12, 12, rng);
    CHECK(rmse(a, a) == 0.0);
    RealImage zero(8, 8, 0.0), one(8, 8, 1.0);
    CHECK(rmse(zero, one) == doctest::Approx(1.0));
    RealImage c(8, 8);
    CHECK_THROWS_AS(rmse(one, RealImage(8, 9)), std::invalid_argument);
}

TEST_CASE("rmse satisfies the triangle inequality on random triples") {
    std::mt19937_64 rng(35);
    for (int t = 0; t < 20; ++t) {
        const RealImage a = oracle::random_image(10, 10, rng);
        const RealImage b = oracle::random_image(10, 10, rng);
        const RealImage c = oracle::random_image(10, 10, rng);
        CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12);
    }
}

TEST_CASE("accuracy and confusion") {
    std::vector<int> pred{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<uint8_t> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(accuracy(pred, labels) == 1.0);

    std::vector<int> same(10, 3);
    CHECK(accuracy(same, labels) == doctest::Approx(0.1));

    auto cm = confusion(same, labels);
    int trace = 0, total = 0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            total += cm[i][j];
            if (i == j) trace += cm[i][j];
        }
    CHECK(static_cast<double>(trace) / total == doctest::Approx(accuracy(same, labels)));

    CHECK_THROWS_AS(accuracy(std::vector<int>{1}, labels), std::invalid_argument);
}
