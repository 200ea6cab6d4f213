#include "dgs/renderer.hpp"

#include "dgs/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace dgs {

namespace {

// Per-primitive screen-space cotangents accumulated over pixels:
// u, v, conic a, conic b (total over both off-diagonals), conic c, opacity, r, g, b.
constexpr int kAccum = 9;

Projection project_primitive(const GaussianPrimitive &p, const Camera &camera) {
    Projection proj;
    proj.cam_point = camera.to_camera(p.mean);
    if (proj.cam_point.z() <= kNearPlane) {
        return proj;
    }
    proj.jacobian = projection_jacobian(camera, proj.cam_point);
    const Mat3 cov = build_covariance(p.log_scale, p.rotation);
    proj.cov_cam = camera.rotation * cov * camera.rotation.transpose();
    proj.cov2d = proj.jacobian * proj.cov_cam * proj.jacobian.transpose();
    proj.cov2d(1, 0) = proj.cov2d(0, 1);
    proj.cov2d(0, 0) += kLowPassFloor;
    proj.cov2d(1, 1) += kLowPassFloor;
    const double det = proj.cov2d(0, 0) * proj.cov2d(1, 1) - proj.cov2d(0, 1) * proj.cov2d(0, 1);
    if (!(det > 0.0) || !(proj.cov2d(0, 0) > 0.0)) {
        return proj;
    }
    proj.conic_a = proj.cov2d(1, 1) / det;
    proj.conic_b = -proj.cov2d(0, 1) / det;
    proj.conic_c = proj.cov2d(0, 0) / det;
    proj.opacity = p.opacity();
    proj.uv = Vec2(camera.focal.x() * proj.cam_point.x() / proj.cam_point.z() + camera.principal_point.x(),
                   camera.focal.y() * proj.cam_point.y() / proj.cam_point.z() + camera.principal_point.y());
    // o·exp(-q/2) >= 1/255 only inside the ellipse q <= 2 ln(255 o); its
    // axis-aligned extent is sqrt(q_max · Σ'_kk).
    const double q_max = 2.0 * std::log(proj.opacity / kMinAlpha);
    if (!(q_max > 0.0)) {
        return proj;
    }
    const double rx = std::sqrt(q_max * proj.cov2d(0, 0));
    const double ry = std::sqrt(q_max * proj.cov2d(1, 1));
    const double x0 = std::ceil(proj.uv.x() - rx), x1 = std::floor(proj.uv.x() + rx);
    const double y0 = std::ceil(proj.uv.y() - ry), y1 = std::floor(proj.uv.y() + ry);
    if (x1 < 0.0 || y1 < 0.0 || x0 > camera.width - 1 || y0 > camera.height - 1) {
        return proj;
    }
    proj.x_min = static_cast<int>(std::max(x0, 0.0));
    proj.x_max = static_cast<int>(std::min(x1, double(camera.width - 1)));
    proj.y_min = static_cast<int>(std::max(y0, 0.0));
    proj.y_max = static_cast<int>(std::min(y1, double(camera.height - 1)));
    proj.visible = true;
    return proj;
}

struct BucketRecords {
    std::vector<BlendRecord> records;
    std::vector<std::uint32_t> counts;
};

} // namespace

bool PrimitiveGrads::all_finite() const {
    return d_mean.allFinite() && d_log_scale.allFinite() && d_rotation.allFinite() &&
           std::isfinite(d_raw_opacity) && d_color.allFinite();
}

ProjectedPoint project_point(const Camera &camera, const Vec3 &mean) {
    const Vec3 c = camera.to_camera(mean);
    return {Vec2(camera.focal.x() * c.x() / c.z() + camera.principal_point.x(),
                 camera.focal.y() * c.y() / c.z() + camera.principal_point.y()),
            c.z()};
}

Mat23 projection_jacobian(const Camera &camera, const Vec3 &cam_point) {
    const double fx = camera.focal.x(), fy = camera.focal.y();
    const double x = cam_point.x(), y = cam_point.y(), z = cam_point.z();
    Mat23 j;
    j << fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z);
    return j;
}

std::optional<Mat2> project_covariance(const Camera &camera, const Vec3 &mean, const Mat3 &cov) {
    const Vec3 c = camera.to_camera(mean);
    if (c.z() <= kNearPlane) {
        return std::nullopt;
    }
    const Mat23 j = projection_jacobian(camera, c);
    Mat2 out = j * (camera.rotation * cov * camera.rotation.transpose()) * j.transpose();
    out(1, 0) = out(0, 1);
    out(0, 0) += kLowPassFloor;
    out(1, 1) += kLowPassFloor;
    const double det = out(0, 0) * out(1, 1) - out(0, 1) * out(1, 0);
    if (!(det > 0.0) || !(out(0, 0) > 0.0)) {
        return std::nullopt;
    }
    return out;
}

RenderOutput render(const Scene &scene, const Camera &camera, const RenderOptions &options) {
    const int width = camera.width, height = camera.height;
    const std::size_t n = scene.size();
    RenderOutput out;
    out.rgb = Image(width, height, 3);
    out.final_transmittance = Image(width, height, 1, 1.0);
    out.background = options.background;
    out.projections.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.projections[i] = project_primitive(scene.primitives[i], camera);
    }

    out.depth_order.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (out.projections[i].visible) out.depth_order.push_back(static_cast<std::uint32_t>(i));
    }
    std::sort(out.depth_order.begin(), out.depth_order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double da = out.projections[a].cam_point.z(), db = out.projections[b].cam_point.z();
        return da < db || (da == db && a < b);
    });

    const int tiles_x = (width + kTileSize - 1) / kTileSize;
    const int tiles_y = (height + kTileSize - 1) / kTileSize;
    std::vector<std::vector<std::uint32_t>> tile_lists(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (std::uint32_t id : out.depth_order) {
        const auto &p = out.projections[id];
        for (int ty = p.y_min / kTileSize; ty <= p.y_max / kTileSize; ++ty) {
            for (int tx = p.x_min / kTileSize; tx <= p.x_max / kTileSize; ++tx) {
                tile_lists[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(id);
            }
        }
    }

    std::vector<BucketRecords> buckets(tiles_y);
    detail::parallel_for(static_cast<std::size_t>(tiles_y), options.threads, [&](std::size_t ty) {
        auto &bucket = buckets[ty];
        const int y_begin = static_cast<int>(ty) * kTileSize;
        const int y_end = std::min(height, y_begin + kTileSize);
        bucket.counts.assign(static_cast<std::size_t>(y_end - y_begin) * width, 0);
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const auto &list = tile_lists[ty * tiles_x + x / kTileSize];
                double transmittance = 1.0;
                Vec3 color = Vec3::Zero();
                std::uint32_t count = 0;
                for (std::uint32_t id : list) {
                    const auto &p = out.projections[id];
                    if (x < p.x_min || x > p.x_max || y < p.y_min || y > p.y_max) continue;
                    const double dx = x - p.uv.x(), dy = y - p.uv.y();
                    const double q = p.conic_a * dx * dx + 2.0 * p.conic_b * dx * dy + p.conic_c * dy * dy;
                    const double raw_alpha = p.opacity * std::exp(-0.5 * q);
                    if (raw_alpha < kMinAlpha) continue;
                    const bool clamped = raw_alpha > kMaxAlpha;
                    const double alpha = clamped ? kMaxAlpha : raw_alpha;
                    bucket.records.push_back({id, clamped, alpha, transmittance});
                    ++count;
                    color += scene.primitives[id].color * (alpha * transmittance);
                    transmittance *= 1.0 - alpha;
                    if (transmittance < kMinTransmittance) break;
                }
                bucket.counts[static_cast<std::size_t>(y - y_begin) * width + x] = count;
                const std::size_t px = static_cast<std::size_t>(y) * width + x;
                for (int c = 0; c < 3; ++c) {
                    out.rgb.data[px * 3 + c] = color[c] + transmittance * options.background[c];
                }
                out.final_transmittance.data[px] = transmittance;
            }
        }
    });

    std::size_t total = 0;
    for (const auto &b : buckets) total += b.records.size();
    out.records.reserve(total);
    out.record_offset.reserve(static_cast<std::size_t>(width) * height + 1);
    out.record_offset.push_back(0);
    for (const auto &b : buckets) {
        out.records.insert(out.records.end(), b.records.begin(), b.records.end());
        for (std::uint32_t c : b.counts) out.record_offset.push_back(out.record_offset.back() + c);
    }
    return out;
}

std::vector<PrimitiveGrads> backward(const Scene &scene, const Camera &camera, const RenderOutput &output,
                                     const Image &d_loss_d_rgb, int threads) {
    const int width = camera.width, height = camera.height;
    if (d_loss_d_rgb.width != width || d_loss_d_rgb.height != height || d_loss_d_rgb.channels != 3 ||
        !output.rgb.same_shape(d_loss_d_rgb)) {
        fail(ErrorCode::InvalidArgument, "backward: cotangent image shape does not match the render");
    }
    const std::size_t n = scene.size();
    if (output.projections.size() != n ||
        output.record_offset.size() != static_cast<std::size_t>(width) * height + 1) {
        fail(ErrorCode::InvalidArgument, "backward: render output does not belong to this scene/camera");
    }

    const int buckets = (height + kTileSize - 1) / kTileSize;
    std::vector<std::vector<double>> accum(buckets);
    detail::parallel_for(static_cast<std::size_t>(buckets), threads, [&](std::size_t b) {
        auto &acc = accum[b];
        acc.assign(n * kAccum, 0.0);
        const int y_begin = static_cast<int>(b) * kTileSize;
        const int y_end = std::min(height, y_begin + kTileSize);
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t px = static_cast<std::size_t>(y) * width + x;
                const Vec3 d_pix(d_loss_d_rgb.data[px * 3], d_loss_d_rgb.data[px * 3 + 1],
                                 d_loss_d_rgb.data[px * 3 + 2]);
                if (d_pix.isZero(0.0)) continue;
                // Radiance behind the current contribution, weighted by transmittance.
                Vec3 behind = output.final_transmittance.data[px] * output.background;
                for (std::size_t r = output.record_offset[px + 1]; r-- > output.record_offset[px];) {
                    const BlendRecord &rec = output.records[r];
                    const Projection &p = output.projections[rec.primitive];
                    const Vec3 &color = scene.primitives[rec.primitive].color;
                    double *g = &acc[static_cast<std::size_t>(rec.primitive) * kAccum];
                    const double weight = rec.alpha * rec.transmittance;
                    g[6] += d_pix[0] * weight;
                    g[7] += d_pix[1] * weight;
                    g[8] += d_pix[2] * weight;
                    const double d_alpha =
                        d_pix.dot(rec.transmittance * color - behind / (1.0 - rec.alpha));
                    behind += weight * color;
                    if (rec.clamped) continue;
                    const double dx = x - p.uv.x(), dy = y - p.uv.y();
                    g[5] += d_alpha * rec.alpha / p.opacity;
                    const double d_q = -0.5 * rec.alpha * d_alpha;
                    g[0] += -2.0 * d_q * (p.conic_a * dx + p.conic_b * dy);
                    g[1] += -2.0 * d_q * (p.conic_b * dx + p.conic_c * dy);
                    g[2] += d_q * dx * dx;
                    g[3] += d_q * 2.0 * dx * dy;
                    g[4] += d_q * dy * dy;
                }
            }
        }
    });

    std::vector<double> total(n * kAccum, 0.0);
    for (const auto &acc : accum) {
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += acc[i];
    }

    std::vector<PrimitiveGrads> grads(n);
    const double fx = camera.focal.x(), fy = camera.focal.y();
    for (std::size_t i = 0; i < n; ++i) {
        const Projection &p = output.projections[i];
        const double *g = &total[i * kAccum];
        PrimitiveGrads &out = grads[i];
        out.d_color = Vec3(g[6], g[7], g[8]);
        if (!p.visible) continue;
        const GaussianPrimitive &prim = scene.primitives[i];
        out.d_raw_opacity = g[5] * p.opacity * (1.0 - p.opacity);

        // Conic -> screen covariance: d cov2d = -A G A.
        Mat2 conic;
        conic << p.conic_a, p.conic_b, p.conic_b, p.conic_c;
        Mat2 g_conic;
        g_conic << g[2], 0.5 * g[3], 0.5 * g[3], g[4];
        const Mat2 g_cov2d = -conic * g_conic * conic;

        const Mat23 &j = p.jacobian;
        const Mat3 g_cov_cam = j.transpose() * g_cov2d * j;
        const Mat23 g_j = 2.0 * g_cov2d * j * p.cov_cam;

        const double tx = p.cam_point.x(), ty = p.cam_point.y(), tz = p.cam_point.z();
        const double tz2 = tz * tz, tz3 = tz2 * tz;
        Vec3 g_cam = j.transpose() * Vec2(g[0], g[1]);
        g_cam.x() += g_j(0, 2) * (-fx / tz2);
        g_cam.y() += g_j(1, 2) * (-fy / tz2);
        g_cam.z() += g_j(0, 0) * (-fx / tz2) + g_j(0, 2) * (2.0 * fx * tx / tz3) + g_j(1, 1) * (-fy / tz2) +
                     g_j(1, 2) * (2.0 * fy * ty / tz3);
        out.d_mean = camera.rotation.transpose() * g_cam;

        const Mat3 g_cov = camera.rotation.transpose() * g_cov_cam * camera.rotation;
        const Vec4 q_raw = prim.rotation;
        const double q_norm = q_raw.norm();
        const Vec4 q = q_raw / q_norm;
        const Mat3 rot = quat_to_rotmat(q);
        const Vec3 s = prim.scale();
        const Mat3 m = rot * s.asDiagonal();
        const Mat3 g_m = 2.0 * g_cov * m;
        for (int k = 0; k < 3; ++k) {
            out.d_log_scale[k] = s[k] * g_m.col(k).dot(rot.col(k));
        }
        const Mat3 g_rot = g_m * s.asDiagonal();
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        Mat3 dw, dx, dy, dz;
        dw << 0, -z, y, z, 0, -x, -y, x, 0;
        dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
        dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
        dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
        const Vec4 g_qn(2.0 * g_rot.cwiseProduct(dw).sum(), 2.0 * g_rot.cwiseProduct(dx).sum(),
                        2.0 * g_rot.cwiseProduct(dy).sum(), 2.0 * g_rot.cwiseProduct(dz).sum());
        out.d_rotation = (g_qn - q * q.dot(g_qn)) / q_norm;
    }
    return grads;
}

} // namespace dgs
