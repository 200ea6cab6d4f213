#include "dgs/error.hpp"
#include "dgs/optimizer.hpp"
#include "dgs/renderer.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace dgs;

namespace {

// Pinhole projection written as a homogeneous 3×4 product.
Vec2 homogeneous_projection(const Camera &cam, const Vec3 &x) {
    Eigen::Matrix<double, 3, 4> rt;
    rt.leftCols<3>() = cam.rotation;
    rt.col(3) = cam.translation;
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = cam.focal.x();
    k(1, 1) = cam.focal.y();
    k(0, 2) = cam.principal_point.x();
    k(1, 2) = cam.principal_point.y();
    const Vec3 h = k * rt * Eigen::Vector4d(x.x(), x.y(), x.z(), 1.0);
    return h.head<2>() / h.z();
}

// Single-primitive pixel oracle from the density definition.
double alpha_at(const Camera &cam, const GaussianPrimitive &p, double px, double py) {
    const Mat2 cov = *project_covariance(cam, p.mean, build_covariance(p.log_scale, p.rotation));
    const Vec2 d = Vec2(px, py) - homogeneous_projection(cam, p.mean);
    const double power = -0.5 * d.dot(cov.inverse() * d);
    return std::min(kMaxAlpha, p.opacity() * std::exp(power));
}

double weighted_sum(const Image &img, const Image &w) {
    double s = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) s += img.data[i] * w.data[i];
    return s;
}

} // namespace

TEST_CASE("projection matches the homogeneous pinhole model") {
    const Camera cam = testing::front_camera(40, 30);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        const Vec3 x(u(rng), u(rng), u(rng));
        const ProjectedPoint p = project_point(cam, x);
        const Vec2 oracle = homogeneous_projection(cam, x);
        CHECK((p.uv - oracle).norm() < 1e-12);
        CHECK(p.depth == doctest::Approx(cam.to_camera(x).z()).epsilon(1e-14));
    }
}

TEST_CASE("projection jacobian matches central differences") {
    const Camera cam = testing::front_camera();
    const Vec3 c(0.3, -0.4, 3.7);
    const Mat23 j = projection_jacobian(cam, c);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = c, b = c;
        a[k] += h;
        b[k] -= h;
        auto proj = [&](const Vec3 &p) {
            return Vec2(cam.focal.x() * p.x() / p.z(), cam.focal.y() * p.y() / p.z());
        };
        const Vec2 fd = (proj(a) - proj(b)) / (2 * h);
        CHECK((j.col(k) - fd).norm() < 1e-7);
    }
}

TEST_CASE("screen covariance equals the linearized push-forward plus the low-pass floor") {
    const Camera cam = testing::front_camera();
    std::mt19937_64 rng(9);
    for (int t = 0; t < 10; ++t) {
        const Vec3 mean(0.1 * t - 0.4, 0.2, 0.05 * t);
        const Mat3 cov = build_covariance(Vec3(-2.0, -1.5, -2.5), testing::random_quat(rng));
        // Push forward samples of a tiny ellipsoid through the exact projection.
        const double h = 1e-6;
        Mat23 jw;
        for (int k = 0; k < 3; ++k) {
            Vec3 a = mean, b = mean;
            a[k] += h;
            b[k] -= h;
            jw.col(k) = (homogeneous_projection(cam, a) - homogeneous_projection(cam, b)) / (2 * h);
        }
        const Mat2 oracle = jw * cov * jw.transpose() + kLowPassFloor * Mat2::Identity();
        const auto got = project_covariance(cam, mean, cov);
        REQUIRE(got.has_value());
        CHECK((*got - oracle).cwiseAbs().maxCoeff() < 1e-6 * oracle.norm());
    }
}

TEST_CASE("points behind the near plane are not projected") {
    const Camera cam = testing::front_camera();
    const Mat3 cov = 0.01 * Mat3::Identity();
    CHECK_FALSE(project_covariance(cam, Vec3(0, 0, -3.9), cov).has_value());
    CHECK_FALSE(project_covariance(cam, Vec3(0, 0, -8.0), cov).has_value());
    Scene s;
    GaussianPrimitive p;
    p.mean = Vec3(0, 0, -8.0);
    p.raw_opacity = 3.0;
    s.push_back(p);
    const RenderOutput out = render(s, cam);
    CHECK(out.records.empty());
}

TEST_CASE("empty scene renders the background") {
    RenderOptions opt;
    opt.background = Vec3(0.2, 0.4, 0.6);
    const RenderOutput out = render(Scene{}, testing::front_camera(20, 10), opt);
    CHECK(out.rgb.width == 20);
    CHECK(out.rgb.height == 10);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 20; ++x) {
            CHECK(out.rgb.at(x, y, 0) == 0.2);
            CHECK(out.rgb.at(x, y, 2) == 0.6);
            CHECK(out.final_transmittance.at(x, y) == 1.0);
        }
    }
}

TEST_CASE("single primitive pixel equals the closed-form blend") {
    const Camera cam = testing::front_camera();
    GaussianPrimitive p;
    p.mean = Vec3(0.1, 0.05, 0.0);
    p.log_scale = Vec3(std::log(0.3), std::log(0.2), std::log(0.25));
    p.rotation = Vec4(0.8, 0.2, 0.1, -0.3);
    p.raw_opacity = logit(0.7);
    p.color = Vec3(0.9, 0.3, 0.5);
    Scene s;
    s.push_back(p);
    RenderOptions opt;
    opt.background = Vec3(0.1, 0.2, 0.3);
    const RenderOutput out = render(s, cam, opt);
    int checked = 0;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const double a = alpha_at(cam, p, x, y);
            if (a < kMinAlpha) continue;
            ++checked;
            for (int c = 0; c < 3; ++c) {
                CHECK(out.rgb.at(x, y, c) ==
                      doctest::Approx(a * p.color[c] + (1 - a) * opt.background[c]).epsilon(1e-12));
            }
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("two primitives composite front to back") {
    const Camera cam = testing::front_camera();
    GaussianPrimitive near, far;
    near.mean = Vec3(0.0, 0.0, -1.0);
    near.log_scale = Vec3::Constant(std::log(0.3));
    near.raw_opacity = logit(0.6);
    near.color = Vec3(1.0, 0.0, 0.0);
    far = near;
    far.mean = Vec3(0.1, 0.0, 1.0);
    far.raw_opacity = logit(0.8);
    far.color = Vec3(0.0, 0.0, 1.0);
    for (bool swap : {false, true}) {
        Scene s;
        s.push_back(swap ? far : near);
        s.push_back(swap ? near : far);
        RenderOptions opt;
        opt.background = Vec3(0.0, 1.0, 0.0);
        const RenderOutput out = render(s, cam, opt);
        for (int y = 10; y < 22; ++y) {
            for (int x = 10; x < 22; ++x) {
                const double a1 = alpha_at(cam, near, x, y);
                const double a2 = alpha_at(cam, far, x, y);
                if (a1 < kMinAlpha || a2 < kMinAlpha) continue;
                const Vec3 expect = a1 * near.color + (1 - a1) * a2 * far.color + (1 - a1) * (1 - a2) * opt.background;
                for (int c = 0; c < 3; ++c) CHECK(out.rgb.at(x, y, c) == doctest::Approx(expect[c]).epsilon(1e-12));
                CHECK(out.final_transmittance.at(x, y) == doctest::Approx((1 - a1) * (1 - a2)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("render and backward are bitwise identical for any thread count") {
    const Scene s = testing::random_scene(4, 40);
    const Camera cam = testing::front_camera(48, 40);
    RenderOptions one, many;
    many.threads = 3;
    const RenderOutput a = render(s, cam, one);
    const RenderOutput b = render(s, cam, many);
    CHECK(a.rgb.data == b.rgb.data);
    const Image w = testing::random_image(1, 48, 40);
    const auto ga = backward(s, cam, a, w, 1);
    const auto gb = backward(s, cam, b, w, 4);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(pack_grads(ga[i]) == pack_grads(gb[i]));
    }
}

TEST_CASE("backward rejects a mismatched gradient image") {
    const Scene s = testing::random_scene(1, 2);
    const Camera cam = testing::front_camera();
    const RenderOutput out = render(s, cam);
    CHECK_THROWS_AS(backward(s, cam, out, Image(3, 3)), Error);
}

TEST_CASE("analytic gradients match central differences") {
    const Camera cam = testing::front_camera(24, 24);
    for (std::uint64_t seed : {11u, 12u}) {
        const Scene scene = testing::random_scene(seed, 4);
        const Image w = testing::random_image(seed, 24, 24);
        RenderOptions opt;
        opt.background = Vec3(0.3, 0.1, 0.2);
        const RenderOutput out = render(scene, cam, opt);
        const auto grads = backward(scene, cam, out, w);
        const double h = 1e-5;
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const ParamVector g = pack_grads(grads[i]);
            for (int k = 0; k < kParamCount; ++k) {
                Scene plus = scene, minus = scene;
                testing::param_ref(plus.primitives[i], k) += h;
                testing::param_ref(minus.primitives[i], k) -= h;
                const double fd =
                    (weighted_sum(render(plus, cam, opt).rgb, w) - weighted_sum(render(minus, cam, opt).rgb, w)) /
                    (2 * h);
                INFO("primitive " << i << " param " << k << " analytic " << g[k] << " fd " << fd);
                CHECK(testing::rel_err(g[k], fd, 1e-4) < 1e-4);
            }
        }
    }
}

TEST_CASE("gradients stay finite for degenerate and clamped primitives") {
    const Camera cam = testing::front_camera();
    Scene s;
    GaussianPrimitive p;
    p.raw_opacity = 20.0;  // alpha clamps at the center
    p.log_scale = Vec3(std::log(0.5), std::log(1e-4), std::log(0.5));
    s.push_back(p);
    const RenderOutput out = render(s, cam);
    const auto g = backward(s, cam, out, testing::random_image(3, 32, 32));
    CHECK(g[0].all_finite());
}
