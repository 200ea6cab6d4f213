#include "dgs/lifecycle.hpp"

#include "dgs/error.hpp"
#include "dgs/kdtree.hpp"
#include "dgs/objective.hpp"
#include "dgs/renderer.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dgs {

void write_mutation_log(std::ostream &out, const MutationLog &log) {
    for (const auto &e : log) {
        nlohmann::ordered_json j;
        j["iter"] = e.iteration;
        j["op"] = e.op;
        j["id"] = e.id;
        if (e.source >= 0) j["source"] = e.source;
        if (e.op != "prune") j["opacity"] = e.opacity;
        if (e.op != "relocate") j["score"] = e.score;
        out << j.dump() << '\n';
    }
}

double relocation_opacity(double o_old, int n) {
    if (n < 1) {
        fail(ErrorCode::InvalidArgument, "relocation_opacity: N must be >= 1");
    }
    if (n == 1) {
        return o_old;
    }
    // 1 - (1 - o)^(1/N), written with log1p/expm1 to stay accurate for small o.
    return -std::expm1(std::log1p(-o_old) / n);
}

double relocation_scale_factor(double o_old, double o_new, int n) {
    if (n < 1) {
        fail(ErrorCode::InvalidArgument, "relocation_scale_factor: N must be >= 1");
    }
    if (n == 1) {
        return 1.0;
    }
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) {
        double binom = 1.0;  // C(i-1, k)
        double power = o_new;
        for (int k = 0; k <= i - 1; ++k) {
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            sum += binom * sign * power / std::sqrt(static_cast<double>(k + 1));
            binom = binom * (i - 1 - k) / (k + 1);
            power *= o_new;
        }
    }
    if (!(sum > 0.0)) {
        fail(ErrorCode::Internal, "relocation_scale_factor: non-positive binomial sum");
    }
    return (o_old * o_old) / (sum * sum);
}

Mat3 relocation_covariance(const Mat3 &cov_old, double o_old, double o_new, int n) {
    return relocation_scale_factor(o_old, o_new, n) * cov_old;
}

GaussianPrimitive split_layer(const GaussianPrimitive &target, int n) {
    GaussianPrimitive layer = target;
    if (n == 1) {
        return layer;
    }
    const double o_old = target.opacity();
    const double o_new = relocation_opacity(o_old, n);
    const double c = relocation_scale_factor(o_old, o_new, n);
    layer.raw_opacity = logit(o_new);
    // Σ scales by c, so each standard deviation scales by sqrt(c).
    layer.log_scale = target.log_scale.array() + 0.5 * std::log(c);
    return layer;
}

MutationLog relocate(Scene &scene, OptimizerState *state, double opacity_floor, std::mt19937_64 &rng,
                     std::int64_t iteration) {
    MutationLog log;
    std::vector<std::size_t> dead;
    std::vector<std::size_t> alive;
    std::vector<double> weights;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double o = scene.primitives[i].opacity();
        if (o < opacity_floor) {
            dead.push_back(i);
        } else {
            alive.push_back(i);
            weights.push_back(o);
        }
    }
    if (dead.empty() || alive.empty()) {
        return log;
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<std::size_t> target_of(dead.size());
    std::vector<int> layers(scene.size(), 1);
    for (std::size_t d = 0; d < dead.size(); ++d) {
        target_of[d] = alive[pick(rng)];
        ++layers[target_of[d]];
    }
    for (std::size_t t : alive) {
        if (layers[t] == 1) continue;
        scene.primitives[t] = split_layer(scene.primitives[t], layers[t]);
        if (state) state->reset_row(t);
    }
    for (std::size_t d = 0; d < dead.size(); ++d) {
        const std::size_t t = target_of[d];
        scene.primitives[dead[d]] = scene.primitives[t];
        if (state) state->reset_row(dead[d]);
        log.push_back({iteration, "relocate", static_cast<std::int64_t>(dead[d]), static_cast<std::int64_t>(t),
                       scene.primitives[t].opacity(), 0.0});
    }
    return log;
}

void FisherAccumulator::add(const std::vector<Vec6> &grads) {
    if (grads.size() != fisher.size()) {
        fail(ErrorCode::InvalidArgument, "FisherAccumulator: gradient count mismatch");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        fisher[i].noalias() += grads[i] * grads[i].transpose();
    }
    ++views_accumulated;
}

void fisher_accumulate(FisherAccumulator &acc, const Scene &scene, const std::vector<Camera> &cameras,
                       const std::vector<Image> &targets, const Vec3 &background, int threads) {
    if (cameras.size() != targets.size()) {
        fail(ErrorCode::InvalidArgument, "fisher_accumulate: camera and target counts differ");
    }
    if (acc.fisher.size() != scene.size()) {
        fail(ErrorCode::InvalidArgument, "fisher_accumulate: accumulator size does not match scene");
    }
    RenderOptions options;
    options.background = background;
    options.threads = threads;
    std::vector<Vec6> g6(scene.size());
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const RenderOutput out = render(scene, cameras[v], options);
        Image d_rgb;
        l2_loss(out.rgb, targets[v], &d_rgb);
        const auto grads = backward(scene, cameras[v], out, d_rgb, threads);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            g6[i] << grads[i].d_mean, grads[i].d_log_scale;
        }
        acc.add(g6);
    }
}

std::vector<UncertaintyScore> uncertainty_scores(const FisherAccumulator &acc) {
    if (acc.views_accumulated < 1) {
        fail(ErrorCode::InvalidArgument, "uncertainty_scores: no views accumulated");
    }
    std::vector<UncertaintyScore> scores(acc.fisher.size());
    for (std::size_t i = 0; i < acc.fisher.size(); ++i) {
        Eigen::JacobiSVD<Mat6> svd(acc.fisher[i]);
        scores[i].primitive = i;
        scores[i].u = svd.singularValues().sum();
        scores[i].trace = acc.fisher[i].trace();
    }
    return scores;
}

std::size_t fraction_count(double fraction, std::size_t n) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "fraction must lie in [0, 1)");
    }
    // The tolerance keeps products like 0.1 * 30 = 3.0000000000000004 at 3.
    const double raw = fraction * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw))));
}

void remove_primitives(Scene &scene, OptimizerState *state, const std::vector<std::size_t> &sorted) {
    scene.erase_indices(sorted);
    if (state) {
        std::size_t write = 0, k = 0;
        for (std::size_t read = 0; read < state->rows.size(); ++read) {
            if (k < sorted.size() && sorted[k] == read) {
                ++k;
                continue;
            }
            state->rows[write++] = state->rows[read];
        }
        state->rows.resize(write);
    }
}

std::vector<std::size_t> prune_uncertain(Scene &scene, OptimizerState *state,
                                         const std::vector<UncertaintyScore> &scores, double fraction) {
    const std::size_t n = scene.size();
    if (scores.size() != n) {
        fail(ErrorCode::InvalidArgument, "prune_uncertain: scores do not cover the scene");
    }
    const std::size_t count = fraction_count(fraction, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + count, order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a].u < scores[b].u || (scores[a].u == scores[b].u && a < b);
    });
    std::vector<std::size_t> removed(order.begin(), order.begin() + count);
    std::sort(removed.begin(), removed.end());
    remove_primitives(scene, state, removed);
    return removed;
}

namespace {

double mean_of_sorted(const std::vector<double> &v, int k) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += v[j];
    return sum / k;
}

void require_knn_size(const Scene &scene, int k) {
    if (k < 1 || scene.size() <= static_cast<std::size_t>(k)) {
        fail(ErrorCode::InvalidArgument, "knn_sparsity: need more than k primitives and k >= 1");
    }
}

} // namespace

std::vector<double> knn_sparsity(const Scene &scene, int k) {
    require_knn_size(scene, k);
    std::vector<Vec3> points;
    points.reserve(scene.size());
    for (const auto &p : scene.primitives) points.push_back(p.mean);
    const KdTree tree(std::move(points));
    std::vector<double> d(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        d[i] = mean_of_sorted(tree.nearest_sq(i, k), k);
    }
    return d;
}

std::vector<double> knn_sparsity_bruteforce(const Scene &scene, int k) {
    require_knn_size(scene, k);
    const std::size_t n = scene.size();
    std::vector<double> d(n), dist;
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        const Vec3 &a = scene.primitives[i].mean;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec3 &b = scene.primitives[j].mean;
            const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
            dist.push_back(dx * dx + dy * dy + dz * dz);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        d[i] = mean_of_sorted(dist, k);
    }
    return d;
}

MutationLog refine_sparse(Scene &scene, OptimizerState *state, double densify_fraction, int k,
                          std::int64_t iteration) {
    MutationLog log;
    const std::size_t n = scene.size();
    const std::size_t count = fraction_count(densify_fraction, n);
    if (count == 0) {
        return log;
    }
    const std::vector<double> d = knn_sparsity(scene, k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + count, order.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });
    order.resize(count);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
        scene.primitives[i] = split_layer(scene.primitives[i], 2);
        scene.push_back(scene.primitives[i]);
        if (state) {
            state->reset_row(i);
            state->rows.emplace_back();
        }
        log.push_back({iteration, "split", static_cast<std::int64_t>(scene.size() - 1),
                       static_cast<std::int64_t>(i), scene.primitives[i].opacity(), d[i]});
    }
    return log;
}

} // namespace dgs
