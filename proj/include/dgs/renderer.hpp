#pragma once

#include "dgs/gaussian.hpp"
#include "dgs/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dgs {

inline constexpr double kNearPlane = 0.2;
inline constexpr double kLowPassFloor = 0.3;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
// Rows per accumulation bucket; also the tile edge used for culling.
inline constexpr int kTileSize = 16;

struct RenderOptions {
    Vec3 background = Vec3::Zero();
    // Worker threads; results are bitwise identical for any value.
    int threads = 1;
};

struct ProjectedPoint {
    Vec2 uv;
    double depth;
};

/// Per-primitive screen-space state captured by the forward pass.
struct Projection {
    bool visible = false;
    Vec3 cam_point = Vec3::Zero();
    Vec2 uv = Vec2::Zero();
    Mat23 jacobian = Mat23::Zero();
    Mat3 cov_cam = Mat3::Zero();
    Mat2 cov2d = Mat2::Zero();
    // Inverse of cov2d stored as (a, b, c) for [[a b] [b c]].
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    double opacity = 0.0;
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

struct BlendRecord {
    std::uint32_t primitive;
    bool clamped;
    double alpha;
    double transmittance;  // transmittance in front of this contribution
};

struct RenderOutput {
    Image rgb;
    Image final_transmittance;  // single channel
    Vec3 background = Vec3::Zero();
    std::vector<Projection> projections;
    std::vector<std::uint32_t> depth_order;
    // Records for pixel p live in [record_offset[p], record_offset[p + 1]).
    std::vector<std::size_t> record_offset;
    std::vector<BlendRecord> records;
};

struct PrimitiveGrads {
    Vec3 d_mean = Vec3::Zero();
    Vec3 d_log_scale = Vec3::Zero();
    Vec4 d_rotation = Vec4::Zero();
    double d_raw_opacity = 0.0;
    Vec3 d_color = Vec3::Zero();

    bool all_finite() const;
};

ProjectedPoint project_point(const Camera &camera, const Vec3 &mean);
// Jacobian of the pinhole projection with respect to the camera-space point.
Mat23 projection_jacobian(const Camera &camera, const Vec3 &cam_point);
// EWA screen covariance J W Σ Wᵀ Jᵀ + 0.3 I. Empty when the mean is behind the
// near plane or the result is not positive definite.
std::optional<Mat2> project_covariance(const Camera &camera, const Vec3 &mean, const Mat3 &cov);

RenderOutput render(const Scene &scene, const Camera &camera, const RenderOptions &options = {});

std::vector<PrimitiveGrads> backward(const Scene &scene, const Camera &camera,
                                     const RenderOutput &output, const Image &d_loss_d_rgb,
                                     int threads = 1);

} // namespace dgs
