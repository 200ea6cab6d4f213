#include "dgs/gaussian.hpp"

#include "dgs/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace dgs {

double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void Scene::push_back(const GaussianPrimitive &p) {
    primitives.push_back(p);
    stream_ids.push_back(next_stream_id++);
}

void Scene::erase_indices(const std::vector<std::size_t> &sorted_indices) {
    std::size_t write = 0;
    std::size_t k = 0;
    for (std::size_t read = 0; read < primitives.size(); ++read) {
        if (k < sorted_indices.size() && sorted_indices[k] == read) {
            ++k;
            continue;
        }
        primitives[write] = primitives[read];
        stream_ids[write] = stream_ids[read];
        ++write;
    }
    primitives.resize(write);
    stream_ids.resize(write);
}

void Scene::reset_stream_ids() {
    stream_ids.resize(primitives.size());
    for (std::size_t i = 0; i < stream_ids.size(); ++i) {
        stream_ids[i] = i;
    }
    next_stream_id = primitives.size();
}

void Camera::validate() const {
    if (!(focal.x() > 0.0) || !(focal.y() > 0.0)) {
        fail(ErrorCode::InvalidArgument, "camera focal length must be positive");
    }
    if (width <= 0 || height <= 0) {
        fail(ErrorCode::InvalidArgument, "camera resolution must be positive");
    }
    const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        fail(ErrorCode::InvalidArgument, "camera rotation is not a proper rotation");
    }
}

Camera Camera::look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, Vec2 focal, int width,
                       int height) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.focal = focal;
    cam.width = width;
    cam.height = height;
    cam.principal_point = Vec2(0.5 * width, 0.5 * height);
    return cam;
}

Mat3 quat_to_rotmat(const Vec4 &rotation) {
    const double norm = rotation.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        fail(ErrorCode::InvalidParameter, "quaternion has zero or non-finite norm");
    }
    const Vec4 q = rotation / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 build_covariance(const Vec3 &log_scale, const Vec4 &rotation) {
    const Mat3 m = quat_to_rotmat(rotation) * log_scale.array().exp().matrix().asDiagonal();
    Mat3 cov = m * m.transpose();
    // Symmetrize explicitly; the product is symmetric only up to rounding.
    cov(1, 0) = cov(0, 1);
    cov(2, 0) = cov(0, 2);
    cov(2, 1) = cov(1, 2);
    return cov;
}

double evaluate_density(const GaussianPrimitive &primitive, const Vec3 &x) {
    // Mahalanobis distance in the local frame: Σ⁻¹ = R S⁻² Rᵀ.
    const Mat3 r = quat_to_rotmat(primitive.rotation);
    const Vec3 local = r.transpose() * (x - primitive.mean);
    const Vec3 scaled = local.cwiseQuotient(primitive.scale());
    return std::exp(-0.5 * scaled.squaredNorm());
}

} // namespace dgs
