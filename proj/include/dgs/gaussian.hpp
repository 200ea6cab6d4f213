#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

double logistic(double x);
double logit(double p);

/// One anisotropic 3D Gaussian. Scale is stored as log standard deviations and
/// opacity as a logit so that every real parameter vector is valid. The
/// rotation quaternion is (w, x, y, z) and is normalized on use.
struct GaussianPrimitive {
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
    double raw_opacity = 0.0;
    Vec3 color = Vec3::Constant(0.5);

    double opacity() const { return logistic(raw_opacity); }
    Vec3 scale() const { return log_scale.array().exp(); }
};

/// Ordered primitive list. Each primitive owns a random stream id that
/// follows it through relocation and pruning, so per-primitive noise does not
/// depend on list position or iteration order.
struct Scene {
    std::vector<GaussianPrimitive> primitives;
    std::vector<std::uint64_t> stream_ids;
    std::uint64_t rng_seed = 0;
    std::uint64_t next_stream_id = 0;

    std::size_t size() const { return primitives.size(); }
    void push_back(const GaussianPrimitive &p);
    void erase_indices(const std::vector<std::size_t> &sorted_indices);
    // Restores stream ids 0..n-1 when they were not persisted.
    void reset_stream_ids();
};

/// Pinhole camera with a world-to-camera rigid transform x_c = W x_w + t.
struct Camera {
    Vec2 focal = Vec2(100.0, 100.0);
    Vec2 principal_point = Vec2(32.0, 32.0);
    int width = 64;
    int height = 64;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }
    void validate() const;

    // Camera at `eye` looking at `target`, +y image axis pointing down.
    static Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, Vec2 focal,
                          int width, int height);
};

Mat3 quat_to_rotmat(const Vec4 &rotation);
Mat3 build_covariance(const Vec3 &log_scale, const Vec4 &rotation);
double evaluate_density(const GaussianPrimitive &primitive, const Vec3 &x);

} // namespace dgs
