#pragma once

#include "dgs/gaussian.hpp"
#include "dgs/image.hpp"
#include "dgs/optimizer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace dgs {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// One population change, as written to the mutation log.
struct MutationEvent {
    std::int64_t iteration = 0;
    std::string op;           // "relocate", "prune" or "split"
    std::int64_t id = -1;     // affected primitive (index before the operation for prune)
    std::int64_t source = -1; // relocation target / split origin
    double opacity = 0.0;     // resulting opacity, 0 for prune
    double score = 0.0;       // u for prune, d for split
};

using MutationLog = std::vector<MutationEvent>;

// Newline-delimited JSON, one object per event.
void write_mutation_log(std::ostream &out, const MutationLog &log);

/// 1 − (1 − o)^(1/N): opacity of each of N co-located copies whose stacked
/// alpha equals o.
double relocation_opacity(double o_old, int n);
/// Scalar c with Σ_new = c Σ_old for N co-located copies.
double relocation_scale_factor(double o_old, double o_new, int n);
Mat3 relocation_covariance(const Mat3 &cov_old, double o_old, double o_new, int n);

/// Rewrites `target` in place as one of N layers and returns the layer.
GaussianPrimitive split_layer(const GaussianPrimitive &target, int n);

/// Moves primitives with opacity below the floor onto live primitives drawn
/// with probability proportional to opacity. Optimizer rows of donors and
/// targets are reset.
MutationLog relocate(Scene &scene, OptimizerState *state, double opacity_floor, std::mt19937_64 &rng,
                     std::int64_t iteration = 0);

struct FisherAccumulator {
    std::vector<Mat6> fisher;
    int views_accumulated = 0;

    explicit FisherAccumulator(std::size_t n = 0) : fisher(n, Mat6::Zero()) {}
    // Adds g gᵀ for each primitive's (mean, log_scale) gradient.
    void add(const std::vector<Vec6> &grads);
};

/// Accumulates, per view, the outer product of the squared-error loss
/// gradient with respect to (mean, log_scale).
void fisher_accumulate(FisherAccumulator &acc, const Scene &scene, const std::vector<Camera> &cameras,
                       const std::vector<Image> &targets, const Vec3 &background, int threads = 1);

struct UncertaintyScore {
    std::size_t primitive = 0;
    double u = 0.0;      // sum of singular values
    double trace = 0.0;  // equal to u for PSD matrices
};

std::vector<UncertaintyScore> uncertainty_scores(const FisherAccumulator &acc);

/// Number of primitives removed for a fraction, ⌈fraction·n⌉.
std::size_t fraction_count(double fraction, std::size_t n);

/// Removes the ⌈fraction·n⌉ primitives with smallest u (ties: lower index
/// first). Returns the removed indices, ascending.
std::vector<std::size_t> prune_uncertain(Scene &scene, OptimizerState *state,
                                         const std::vector<UncertaintyScore> &scores, double fraction);
/// Removes the given indices (ascending) from scene and optimizer rows.
void remove_primitives(Scene &scene, OptimizerState *state, const std::vector<std::size_t> &sorted);

/// Mean squared distance to the k nearest other means (kd-tree path).
std::vector<double> knn_sparsity(const Scene &scene, int k);
/// O(n²) reference path; same arithmetic as knn_sparsity.
std::vector<double> knn_sparsity_bruteforce(const Scene &scene, int k);

/// Splits the ⌈fraction·n⌉ sparsest primitives (largest d, ties: lower index)
/// into two co-located layers; the new layer is appended.
MutationLog refine_sparse(Scene &scene, OptimizerState *state, double densify_fraction, int k,
                          std::int64_t iteration = 0);

} // namespace dgs
