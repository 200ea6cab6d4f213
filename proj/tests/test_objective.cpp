#include "dgs/error.hpp"
#include "dgs/objective.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dgs;

TEST_CASE("psnr of identical images is infinite") {
    const Image a = testing::random_image(1, 16, 16);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
}

TEST_CASE("psnr follows the mean squared error") {
    Image a(8, 8, 3, 0.5), b(8, 8, 3, 0.5);
    for (std::size_t i = 0; i < b.size(); i += 2) b.data[i] += 0.1;  // half the values off by 0.1
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / 0.005)).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(a, Image(4, 4)), Error);
}

TEST_CASE("ssim of constant images has a closed form") {
    for (double x : {0.0, 0.2, 0.7}) {
        for (double y : {0.1, 0.5, 1.0}) {
            const Image a(16, 13, 3, x), b(16, 13, 3, y);
            const double expect = (2 * x * y + kSsimC1) / (x * x + y * y + kSsimC1);
            CHECK(ssim(a, b) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("ssim is one for identical images and symmetric") {
    const Image a = testing::random_image(2, 20, 18);
    const Image b = testing::random_image(3, 20, 18);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(ssim(a, b) < 0.5);
}

TEST_CASE("ssim needs room for one window") {
    CHECK_THROWS_AS(ssim(Image(10, 20), Image(10, 20)), Error);
    // With the SSIM weight off the loss accepts small images.
    CHECK_NOTHROW(compute_loss(Image(4, 4), Image(4, 4, 3, 0.5), 0.0));
}

TEST_CASE("loss combines l1 and dssim with weight 0.2") {
    const Image a = testing::random_image(4, 14, 12);
    const Image b = testing::random_image(5, 14, 12);
    const LossReport r = compute_loss(a, b);
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
    l1 /= static_cast<double>(a.size());
    CHECK(r.l1 == doctest::Approx(l1).epsilon(1e-14));
    CHECK(r.dssim == doctest::Approx((1.0 - ssim(a, b)) / 2.0).epsilon(1e-14));
    CHECK(r.total == doctest::Approx(0.8 * r.l1 + 0.2 * r.dssim).epsilon(1e-14));
    const LossReport same = compute_loss(a, a);
    CHECK(same.total == doctest::Approx(0.0));
}

TEST_CASE("loss gradient matches central differences") {
    const Image a = testing::random_image(6, 13, 12);
    const Image b = testing::random_image(7, 13, 12);
    for (double lambda : {0.0, 0.2, 1.0}) {
        const LossReport r = compute_loss(a, b, lambda);
        // Per-pixel SSIM gradients are tiny; a wide step keeps round-off below the tolerance.
        const double h = 1e-4;
        for (std::size_t i = 0; i < a.size(); i += 7) {
            Image p = a, m = a;
            p.data[i] += h;
            m.data[i] -= h;
            const double fd = (compute_loss(p, b, lambda).total - compute_loss(m, b, lambda).total) / (2 * h);
            CHECK(testing::rel_err(r.d_total_d_rgb.data[i], fd, 1e-7) < 1e-5);
        }
    }
}

TEST_CASE("l2 loss and its gradient") {
    const Image a = testing::random_image(8, 5, 4);
    const Image b = testing::random_image(9, 5, 4);
    Image g;
    const double v = l2_loss(a, b, &g);
    double expect = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        expect += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
        CHECK(g.data[i] == doctest::Approx(2 * (a.data[i] - b.data[i])).epsilon(1e-15));
    }
    CHECK(v == doctest::Approx(expect).epsilon(1e-14));
}
