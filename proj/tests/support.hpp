#pragma once

#include "dgs/gaussian.hpp"
#include "dgs/image.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <random>

namespace testing {

inline dgs::Vec4 random_quat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return dgs::Vec4(n(rng), n(rng), n(rng), n(rng)).normalized();
}

// Rotation from Eigen's own quaternion code, independent of quat_to_rotmat.
inline dgs::Mat3 eigen_rotation(const dgs::Vec4 &q) {
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
}

// A few primitives in front of a camera at (0, 0, -4) looking at the origin.
inline dgs::Scene random_scene(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    dgs::Scene scene;
    for (int i = 0; i < n; ++i) {
        dgs::GaussianPrimitive p;
        p.mean = dgs::Vec3(-0.6 + 1.2 * u(rng), -0.6 + 1.2 * u(rng), -0.5 + u(rng));
        p.log_scale = dgs::Vec3(std::log(0.12 + 0.15 * u(rng)), std::log(0.12 + 0.15 * u(rng)),
                                std::log(0.12 + 0.15 * u(rng)));
        p.rotation = random_quat(rng);
        p.raw_opacity = dgs::logit(0.3 + 0.5 * u(rng));
        p.color = dgs::Vec3(0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng));
        scene.push_back(p);
    }
    return scene;
}

inline dgs::Camera front_camera(int w = 32, int h = 32) {
    return dgs::Camera::look_at(dgs::Vec3(0.3, -0.2, -4.0), dgs::Vec3::Zero(), dgs::Vec3(0, -1, 0),
                                dgs::Vec2(40.0, 42.0), w, h);
}

inline dgs::Image random_image(std::uint64_t seed, int w, int h, int c = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    dgs::Image img(w, h, c);
    for (auto &v : img.data) v = u(rng);
    return img;
}

// |a - b| relative to the larger magnitude, with an absolute floor.
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace testing

namespace testing {

// Parameter k in the layout mean(3) log_scale(3) rotation(4) opacity(1) color(3).
inline double &param_ref(dgs::GaussianPrimitive &p, int k) {
    if (k < 3) return p.mean[k];
    if (k < 6) return p.log_scale[k - 3];
    if (k < 10) return p.rotation[k - 6];
    if (k == 10) return p.raw_opacity;
    return p.color[k - 11];
}

} // namespace testing
