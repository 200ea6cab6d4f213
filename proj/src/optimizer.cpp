#include "dgs/optimizer.hpp"

#include "dgs/error.hpp"

#include <algorithm>
#include <cmath>

namespace dgs {

ParamVector pack_params(const GaussianPrimitive &p) {
    return {p.mean.x(), p.mean.y(), p.mean.z(), p.log_scale.x(), p.log_scale.y(), p.log_scale.z(),
            p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3], p.raw_opacity,
            p.color.x(), p.color.y(), p.color.z()};
}

ParamVector pack_grads(const PrimitiveGrads &g) {
    return {g.d_mean.x(), g.d_mean.y(), g.d_mean.z(), g.d_log_scale.x(), g.d_log_scale.y(),
            g.d_log_scale.z(), g.d_rotation[0], g.d_rotation[1], g.d_rotation[2], g.d_rotation[3],
            g.d_raw_opacity, g.d_color.x(), g.d_color.y(), g.d_color.z()};
}

double LearningRates::mean_at(std::int64_t step) const {
    const double t = max_steps > 0 ? std::clamp(static_cast<double>(step) / max_steps, 0.0, 1.0) : 1.0;
    return std::exp((1.0 - t) * std::log(mean_init) + t * std::log(mean_final));
}

ParamVector LearningRates::rates_at(std::int64_t step) const {
    const double m = mean_at(step);
    return {m, m, m, log_scale, log_scale, log_scale, rotation, rotation, rotation, rotation, opacity,
            color, color, color};
}

void ExploreConfig::validate() const {
    if (!(tau >= 0.0)) fail(ErrorCode::InvalidArgument, "explore.tau must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0) && alpha != 0.0)
        fail(ErrorCode::InvalidArgument, "explore.alpha must lie in (0, 1] (or 0 to disable)");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(ErrorCode::InvalidArgument, "explore.beta1 must lie in [0, 1)");
    if (!(beta2 > 0.0 && beta2 <= 1.0) && beta2 != 0.0)
        fail(ErrorCode::InvalidArgument, "explore.beta2 must lie in (0, 1] (or 0 to disable)");
    if (denoise_sign != 1.0 && denoise_sign != -1.0)
        fail(ErrorCode::InvalidArgument, "explore.denoise_sign must be +1 or -1");
}

std::vector<ParamVector> adam_step(OptimizerState &state, const std::vector<PrimitiveGrads> &grads,
                                   const LearningRates &lr, const AdamConfig &adam) {
    if (grads.size() != state.rows.size()) {
        fail(ErrorCode::InvalidArgument, "adam_step: gradient count does not match optimizer state");
    }
    const ParamVector rates = lr.rates_at(state.step_count);
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(adam.beta1, t);
    const double bc2 = 1.0 - std::pow(adam.beta2, t);
    std::vector<ParamVector> deltas(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const ParamVector g = pack_grads(grads[i]);
        auto &row = state.rows[i];
        for (int k = 0; k < kParamCount; ++k) {
            row.adam_m[k] = adam.beta1 * row.adam_m[k] + (1.0 - adam.beta1) * g[k];
            row.adam_v[k] = adam.beta2 * row.adam_v[k] + (1.0 - adam.beta2) * g[k] * g[k];
            const double m_hat = row.adam_m[k] / bc1;
            const double v_hat = row.adam_v[k] / bc2;
            deltas[i][k] = -rates[k] * m_hat / (std::sqrt(v_hat) + adam.epsilon);
        }
    }
    return deltas;
}

double noise_gate(double opacity, const ExploreConfig &cfg) {
    return logistic(-cfg.gate_sharpness * (opacity - cfg.gate_threshold));
}

Vec3 sample_exploration_noise(const GaussianPrimitive &primitive, double lr_mean, const ExploreConfig &cfg,
                              const NoiseKey &key) {
    if (cfg.tau == 0.0) {
        return Vec3::Zero();
    }
    const double amplitude = std::sqrt(2.0 * lr_mean * cfg.tau) * noise_gate(primitive.opacity(), cfg);
    const Mat3 r = quat_to_rotmat(primitive.rotation);
    const Mat3 sqrt_cov = r * primitive.scale().asDiagonal() * r.transpose();
    return amplitude * (sqrt_cov * counter_normal3(key));
}

Vec3 update_momentum(PrimitiveOptState &row, const Vec3 &prev_mean_grad, double beta1) {
    row.explore_momentum = beta1 * row.explore_momentum + (1.0 - beta1) * prev_mean_grad;
    return row.explore_momentum;
}

namespace {

// Index of the largest |v_k|, lowest index on ties; -1 when v is zero.
int principal_axis(const Vec3 &v) {
    int best = -1;
    double best_abs = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double a = std::abs(v[k]);
        if (a > best_abs) {
            best_abs = a;
            best = k;
        }
    }
    return best;
}

} // namespace

Vec3 spatial_denoise_term(const GaussianPrimitive &primitive, const Vec3 &mean_grad, const Vec3 &scale_grad) {
    const Mat3 r = quat_to_rotmat(primitive.rotation);
    const Vec3 local_grad = r.transpose() * mean_grad;
    const int j = principal_axis(local_grad);
    const int k = principal_axis(scale_grad);
    if (j < 0 || k < 0 || j != k) {
        return Vec3::Zero();
    }
    Vec3 delta = Vec3::Zero();
    delta[j] = std::abs(scale_grad[j]) * (local_grad[j] > 0.0 ? 1.0 : -1.0);
    return r * delta;
}

Vec3 apply_mean_update(const PrimitiveOptState &row, const GaussianPrimitive &primitive,
                       const Vec3 &adam_mean_delta, const Vec3 &mean_grad, const Vec3 &log_scale_grad,
                       double lr_mean, const ExploreConfig &cfg, const MeanUpdateTerms &terms,
                       const NoiseKey &key) {
    Vec3 next = primitive.mean + adam_mean_delta;
    if (terms.noise && cfg.tau != 0.0) {
        next += sample_exploration_noise(primitive, lr_mean, cfg, key);
    }
    if (terms.momentum && cfg.alpha != 0.0) {
        next -= cfg.alpha * lr_mean * row.explore_momentum;
    }
    if (terms.spatial_denoise && cfg.beta2 != 0.0) {
        const Vec3 scale_grad = log_scale_grad.cwiseQuotient(primitive.scale());
        next += (cfg.beta2 * cfg.denoise_sign) * spatial_denoise_term(primitive, mean_grad, scale_grad);
    }
    if (!next.allFinite()) {
        fail(ErrorCode::Diverged, "mean update produced a non-finite position");
    }
    return next;
}

void apply_param_delta(GaussianPrimitive &p, const ParamVector &delta, bool include_mean) {
    if (include_mean) {
        p.mean += Vec3(delta[0], delta[1], delta[2]);
    }
    p.log_scale += Vec3(delta[3], delta[4], delta[5]);
    p.rotation += Vec4(delta[6], delta[7], delta[8], delta[9]);
    p.raw_opacity += delta[10];
    p.color += Vec3(delta[11], delta[12], delta[13]);
    p.color = p.color.cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace dgs
