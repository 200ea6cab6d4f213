#pragma once

#include "dgs/gaussian.hpp"
#include "dgs/renderer.hpp"
#include "dgs/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace dgs {

// Flat per-primitive parameter layout: mean(3) log_scale(3) rotation(4)
// raw_opacity(1) color(3).
inline constexpr int kParamCount = 14;
using ParamVector = std::array<double, kParamCount>;

ParamVector pack_params(const GaussianPrimitive &p);
ParamVector pack_grads(const PrimitiveGrads &g);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// Means decay exponentially from mean_init to mean_final over max_steps; the
/// other groups use constant rates.
struct LearningRates {
    double mean_init = 1e-3;
    double mean_final = 1e-5;
    double log_scale = 2e-3;
    double rotation = 1e-3;
    double opacity = 1e-2;
    double color = 2e-3;
    std::int64_t max_steps = 2000;

    double mean_at(std::int64_t step) const;
    ParamVector rates_at(std::int64_t step) const;
};

struct ExploreConfig {
    double tau = 0.0;           // Langevin temperature
    double alpha = 0.05;        // momentum bias factor, (0, 1]
    double beta1 = 0.9;         // momentum smoothing, [0, 1)
    double beta2 = 0.5;         // spatial denoise coefficient, (0, 1]
    double gate_sharpness = 100.0;
    double gate_threshold = 0.005;
    // +1 applies the denoise displacement along the raw mean gradient, -1
    // along the descent direction.
    double denoise_sign = -1.0;

    void validate() const;
};

struct PrimitiveOptState {
    ParamVector adam_m{};
    ParamVector adam_v{};
    Vec3 explore_momentum = Vec3::Zero();
    Vec3 prev_mean_grad = Vec3::Zero();
};

struct OptimizerState {
    std::vector<PrimitiveOptState> rows;
    std::int64_t step_count = 0;

    explicit OptimizerState(std::size_t n = 0) : rows(n) {}
    void reset_row(std::size_t i) { rows[i] = PrimitiveOptState{}; }
};

/// One bias-corrected Adam step over every primitive. Increments step_count
/// and returns the per-parameter deltas (to be added to the parameters).
std::vector<ParamVector> adam_step(OptimizerState &state, const std::vector<PrimitiveGrads> &grads,
                                   const LearningRates &lr, const AdamConfig &adam = {});

/// Opacity gate for exploration noise, logistic(-k (o - t)).
double noise_gate(double opacity, const ExploreConfig &cfg);

/// sqrt(2 lr τ) · gate(o) · Σ^{1/2} ξ with Σ^{1/2} = R S Rᵀ.
Vec3 sample_exploration_noise(const GaussianPrimitive &primitive, double lr_mean, const ExploreConfig &cfg,
                              const NoiseKey &key);

/// m ← β₁ m + (1 − β₁) g_prev; stored in the row and returned.
Vec3 update_momentum(PrimitiveOptState &row, const Vec3 &prev_mean_grad, double beta1);

/// World-frame displacement R Δμ. scale_grad is the gradient with respect to
/// the standard deviations s, not their logs.
Vec3 spatial_denoise_term(const GaussianPrimitive &primitive, const Vec3 &mean_grad, const Vec3 &scale_grad);

/// Which exploration terms run; a disabled term is skipped, not multiplied by zero.
struct MeanUpdateTerms {
    bool noise = true;
    bool momentum = true;
    bool spatial_denoise = true;
};

/// mean + adam_delta + noise − α λ m + β₂ R Δμ. Throws Diverged on a
/// non-finite result.
Vec3 apply_mean_update(const PrimitiveOptState &row, const GaussianPrimitive &primitive,
                       const Vec3 &adam_mean_delta, const Vec3 &mean_grad, const Vec3 &log_scale_grad,
                       double lr_mean, const ExploreConfig &cfg, const MeanUpdateTerms &terms,
                       const NoiseKey &key);

/// Adds delta to every parameter and clamps colors to [0, 1]. This is the
/// plain Adam update used for all non-mean parameters, and for means too when
/// exploration is off entirely.
void apply_param_delta(GaussianPrimitive &p, const ParamVector &delta, bool include_mean);

} // namespace dgs
