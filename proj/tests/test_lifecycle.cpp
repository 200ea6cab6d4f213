#include "dgs/error.hpp"
#include "dgs/lifecycle.hpp"
#include "dgs/objective.hpp"
#include "dgs/renderer.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace dgs;

namespace {

// Independent reference for the covariance factor: the double binomial sum
// evaluated term by term with std::lgamma-based coefficients.
double scale_factor_oracle(double o_old, double o_new, int n) {
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int k = 0; k <= i - 1; ++k) {
            const double binom = std::round(std::exp(std::lgamma(i) - std::lgamma(k + 1) - std::lgamma(i - k)));
            sum += binom * std::pow(-1.0, k) * std::pow(o_new, k + 1) / std::sqrt(k + 1.0);
        }
    }
    return o_old * o_old / (sum * sum);
}

Camera centered_camera() {
    return Camera::look_at(Vec3(0.0, 0.0, -4.0), Vec3::Zero(), Vec3(0, -1, 0), Vec2(40, 40), 32, 32);
}

double center_alpha_exact(const Scene &s) {
    const Camera cam = centered_camera();
    const RenderOutput out = render(s, cam);
    return 1.0 - out.final_transmittance.at(16, 16);
}

GaussianPrimitive at_origin(double opacity) {
    GaussianPrimitive p;
    p.log_scale = Vec3(std::log(0.3), std::log(0.2), std::log(0.25));
    p.rotation = Vec4(0.9, 0.2, -0.1, 0.3);
    p.raw_opacity = logit(opacity);
    return p;
}

} // namespace

TEST_CASE("relocation opacity") {
    CHECK(relocation_opacity(0.37, 1) == 0.37);
    CHECK(relocation_opacity(0.9, 2) == doctest::Approx(1.0 - std::sqrt(0.1)).epsilon(1e-14));
    CHECK(relocation_opacity(0.9, 2) == doctest::Approx(0.683772).epsilon(1e-6));
    for (int n : {2, 5, 16}) {
        const double o = 1e-9;
        CHECK(relocation_opacity(o, n) == doctest::Approx(o / n).epsilon(1e-6));
    }
    CHECK_THROWS_AS(relocation_opacity(0.5, 0), Error);
}

TEST_CASE("stacked relocated copies reproduce the original opacity") {
    for (int n = 1; n <= 16; ++n) {
        for (int j = 1; j <= 99; ++j) {
            const double o = 0.01 * j;
            const double o_new = relocation_opacity(o, n);
            CHECK(std::abs(1.0 - std::pow(1.0 - o_new, n) - o) < 1e-12);
        }
    }
}

TEST_CASE("relocation covariance factor") {
    CHECK(relocation_scale_factor(0.42, 0.42, 1) == 1.0);
    const double o_new = relocation_opacity(0.9, 2);
    const double sum = 2 * o_new - o_new * o_new / std::sqrt(2.0);
    CHECK(std::abs(sum - 1.03692) < 5e-5);
    CHECK(relocation_scale_factor(0.9, o_new, 2) == doctest::Approx(0.81 / (sum * sum)).epsilon(1e-13));
    CHECK(std::abs(relocation_scale_factor(0.9, o_new, 2) - 0.7534) < 1e-4);
    for (int n = 1; n <= 8; ++n) {
        for (double o : {0.05, 0.5, 0.95}) {
            const double on = relocation_opacity(o, n);
            CHECK(relocation_scale_factor(o, on, n) == doctest::Approx(scale_factor_oracle(o, on, n)).epsilon(1e-10));
        }
    }
    // A scalar multiple keeps the eigenvectors.
    const Mat3 cov = build_covariance(Vec3(-1.0, -2.0, -1.5), Vec4(0.3, 0.5, 0.1, -0.7));
    const Mat3 scaled = relocation_covariance(cov, 0.9, o_new, 2);
    CHECK((scaled - relocation_scale_factor(0.9, o_new, 2) * cov).norm() == 0.0);
}

TEST_CASE("relocate with nothing below the floor is a no-op") {
    Scene s = testing::random_scene(2, 6);
    const Scene before = s;
    std::mt19937_64 rng(1);
    const auto log = relocate(s, nullptr, 0.005, rng);
    CHECK(log.empty());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(pack_params(s.primitives[i]) == pack_params(before.primitives[i]));
}

TEST_CASE("relocate one donor onto one target") {
    Scene s;
    s.push_back(at_origin(0.9));
    GaussianPrimitive dead = at_origin(0.001);
    dead.mean = Vec3(1.0, 2.0, 3.0);
    s.push_back(dead);
    const double before = center_alpha_exact(Scene{{s.primitives[0]}, {0}, 0, 1});
    OptimizerState state(2);
    state.rows[0].adam_m.fill(1.0);
    state.rows[1].explore_momentum = Vec3(1, 1, 1);
    std::mt19937_64 rng(3);
    const auto log = relocate(s, &state, 0.005, rng, 100);
    REQUIRE(log.size() == 1);
    CHECK(log[0].id == 1);
    CHECK(log[0].source == 0);
    CHECK(log[0].iteration == 100);
    const double c = relocation_scale_factor(0.9, relocation_opacity(0.9, 2), 2);
    for (const auto &p : s.primitives) {
        CHECK(p.opacity() == doctest::Approx(0.683772).epsilon(1e-6));
        CHECK(p.mean == Vec3::Zero());
        const Mat3 expect = c * build_covariance(at_origin(0.9).log_scale, at_origin(0.9).rotation);
        CHECK((build_covariance(p.log_scale, p.rotation) - expect).norm() < 1e-14);
    }
    CHECK(c == doctest::Approx(0.7534).epsilon(1e-4));
    CHECK(state.rows[0].adam_m[0] == 0.0);
    CHECK(state.rows[1].explore_momentum == Vec3::Zero());
    CHECK(std::abs(center_alpha_exact(s) - before) < 1e-12);
    CHECK(std::abs(before - 0.9) < 1e-12);
}

TEST_CASE("relocation preserves accumulated alpha at the shared mean") {
    for (int donors = 1; donors <= 6; ++donors) {
        for (double o : {0.2, 0.6, 0.95}) {
            Scene s;
            s.push_back(at_origin(o));
            for (int d = 0; d < donors; ++d) {
                GaussianPrimitive p = at_origin(0.002);
                p.mean = Vec3(5.0 + d, 0.0, 0.0);
                s.push_back(p);
            }
            const double before = center_alpha_exact(Scene{{s.primitives[0]}, {0}, 0, 1});
            std::mt19937_64 rng(donors);
            relocate(s, nullptr, 0.005, rng);
            CHECK(std::abs(center_alpha_exact(s) - before) < 1e-12);
            CHECK(std::abs(before - o) < 1e-12);
        }
    }
}

TEST_CASE("relocation targets follow opacity") {
    Scene s;
    GaussianPrimitive lo = at_origin(0.1), hi = at_origin(0.9);
    s.push_back(lo);
    s.push_back(hi);
    for (int d = 0; d < 400; ++d) s.push_back(at_origin(0.001));
    std::mt19937_64 rng(5);
    const auto log = relocate(s, nullptr, 0.005, rng);
    const auto to_hi = std::count_if(log.begin(), log.end(), [](const MutationEvent &e) { return e.source == 1; });
    CHECK(to_hi > 320);  // expected 360 of 400
    CHECK(to_hi < 395);
}

TEST_CASE("fisher: single view is rank one with singular value |g|^2") {
    Scene scene = testing::random_scene(8, 3);
    const Camera cam = testing::front_camera(24, 24);
    const Image target = testing::random_image(2, 24, 24);
    FisherAccumulator acc(scene.size());
    fisher_accumulate(acc, scene, {cam}, {target}, Vec3::Zero());
    const auto scores = uncertainty_scores(acc);
    const double h = 1e-6;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        // Gradient of the squared error by central differences.
        Vec6 g;
        for (int k = 0; k < 6; ++k) {
            Scene p = scene, m = scene;
            testing::param_ref(p.primitives[i], k) += h;
            testing::param_ref(m.primitives[i], k) -= h;
            g[k] = (l2_loss(render(p, cam).rgb, target) - l2_loss(render(m, cam).rgb, target)) / (2 * h);
        }
        CHECK(scores[i].u == doctest::Approx(g.squaredNorm()).epsilon(1e-5));
        Eigen::JacobiSVD<Mat6> svd(acc.fisher[i]);
        CHECK(svd.singularValues()[1] < 1e-9 * svd.singularValues()[0]);
        CHECK(std::abs(scores[i].u - scores[i].trace) < 1e-9 * std::max(1.0, scores[i].u));
    }
}

TEST_CASE("fisher: orthogonal gradients give their squared norms") {
    FisherAccumulator acc(1);
    Vec6 g, h;
    g << 1, 2, 0, 0, 0, 0;
    h << 0, 0, 3, 0, 0, 1;
    acc.add({g});
    acc.add({h});
    Eigen::JacobiSVD<Mat6> svd(acc.fisher[0]);
    const auto s = svd.singularValues();
    CHECK(s[0] == doctest::Approx(10.0));
    CHECK(s[1] == doctest::Approx(5.0));
    CHECK(s.tail<4>().norm() < 1e-12);
    CHECK(uncertainty_scores(acc)[0].u == doctest::Approx(15.0).epsilon(1e-14));
}

TEST_CASE("uncertainty scores") {
    FisherAccumulator acc(2);
    acc.views_accumulated = 1;
    acc.fisher[1].diagonal() << 1, 2, 3, 0, 0, 0;
    const auto sc = uncertainty_scores(acc);
    CHECK(sc[0].u == 0.0);
    CHECK(sc[1].u == doctest::Approx(6.0).epsilon(1e-14));
    CHECK_THROWS_AS(uncertainty_scores(FisherAccumulator(3)), Error);
}

TEST_CASE("svd sum equals trace on random psd accumulations") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    FisherAccumulator acc(100);
    for (int v = 0; v < 4; ++v) {
        std::vector<Vec6> g(100);
        for (auto &x : g)
            for (int k = 0; k < 6; ++k) x[k] = n(rng) * std::pow(10.0, k - 3);
        acc.add(g);
    }
    for (const auto &s : uncertainty_scores(acc)) {
        CHECK(std::abs(s.u - s.trace) < 1e-9 * std::max(1.0, s.trace));
        Eigen::SelfAdjointEigenSolver<Mat6> eig(acc.fisher[s.primitive]);
        CHECK(eig.eigenvalues().minCoeff() > -1e-12 * s.trace);
        CHECK((acc.fisher[s.primitive] - acc.fisher[s.primitive].transpose()).norm() == 0.0);
    }
}

TEST_CASE("fraction count") {
    CHECK(fraction_count(0.0, 50) == 0);
    CHECK(fraction_count(0.1, 10) == 1);
    CHECK(fraction_count(0.1, 30) == 3);
    CHECK(fraction_count(0.1, 31) == 4);
    CHECK(fraction_count(0.0005, 150) == 1);
    CHECK_THROWS_AS(fraction_count(1.0, 5), Error);
    CHECK_THROWS_AS(fraction_count(-0.1, 5), Error);
}

TEST_CASE("prune removes the lowest scores") {
    SUBCASE("fraction zero") {
        Scene s = testing::random_scene(1, 10);
        std::vector<UncertaintyScore> sc(10);
        CHECK(prune_uncertain(s, nullptr, sc, 0.0).empty());
        CHECK(s.size() == 10);
    }
    SUBCASE("single argmin") {
        Scene s = testing::random_scene(1, 10);
        std::vector<UncertaintyScore> sc(10);
        for (std::size_t i = 0; i < 10; ++i) sc[i] = {i, 5.0 + static_cast<double>((i * 7) % 10), 0.0};
        const auto removed = prune_uncertain(s, nullptr, sc, 0.1);
        CHECK(removed == std::vector<std::size_t>{0});
        CHECK(s.size() == 9);
    }
    SUBCASE("ties break toward lower index") {
        Scene s = testing::random_scene(1, 10);
        std::vector<UncertaintyScore> sc(10, UncertaintyScore{0, 1.0, 1.0});
        CHECK(prune_uncertain(s, nullptr, sc, 0.2) == std::vector<std::size_t>{0, 1});
    }
    SUBCASE("optimizer rows follow the survivors") {
        Scene s = testing::random_scene(1, 5);
        OptimizerState st(5);
        for (int i = 0; i < 5; ++i) st.rows[i].adam_m[0] = i;
        std::vector<UncertaintyScore> sc(5);
        for (std::size_t i = 0; i < 5; ++i) sc[i].u = i == 2 ? 0.0 : 1.0;
        prune_uncertain(s, &st, sc, 0.1);
        CHECK(st.rows.size() == 4);
        CHECK(st.rows[2].adam_m[0] == 3.0);
        CHECK(s.stream_ids == std::vector<std::uint64_t>{0, 1, 3, 4});
    }
}

TEST_CASE("prune matches a full sort") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double f : {0.1, 0.25, 0.5}) {
        Scene s = testing::random_scene(3, 1000);
        std::vector<UncertaintyScore> sc(1000);
        for (std::size_t i = 0; i < sc.size(); ++i) sc[i] = {i, u(rng), 0.0};
        std::vector<std::size_t> order(1000);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sc[a].u < sc[b].u; });
        const std::size_t m = static_cast<std::size_t>(std::ceil(f * 1000 - 1e-9));
        std::vector<std::size_t> oracle(order.begin(), order.begin() + m);
        std::sort(oracle.begin(), oracle.end());
        const auto removed = prune_uncertain(s, nullptr, sc, f);
        CHECK(removed == oracle);
        CHECK(s.size() == 1000 - m);
        double max_removed = 0.0, min_kept = 2.0;
        for (std::size_t i = 0; i < 1000; ++i) {
            const bool gone = std::binary_search(removed.begin(), removed.end(), i);
            (gone ? max_removed : min_kept) = gone ? std::max(max_removed, sc[i].u) : std::min(min_kept, sc[i].u);
        }
        CHECK(max_removed <= min_kept);
    }
}

TEST_CASE("knn sparsity on simple configurations") {
    Scene square;
    for (auto xy : {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}) {
        GaussianPrimitive p;
        p.mean = xy;
        square.push_back(p);
    }
    for (double d : knn_sparsity(square, 2)) CHECK(d == 1.0);
    Scene same;
    for (int i = 0; i < 5; ++i) same.push_back(GaussianPrimitive{});
    for (double d : knn_sparsity(same, 3)) CHECK(d == 0.0);
    CHECK_THROWS_AS(knn_sparsity(square, 4), Error);
}

TEST_CASE("kd-tree sparsity equals brute force exactly") {
    for (int n : {9, 100, 2048}) {
        Scene s;
        std::mt19937_64 rng(n);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int i = 0; i < n; ++i) {
            GaussianPrimitive p;
            p.mean = Vec3(u(rng), u(rng), 0.1 * u(rng));
            s.push_back(p);
        }
        // Duplicated points exercise ties.
        s.push_back(s.primitives[3]);
        for (int k : {1, 3, 8}) {
            CHECK(knn_sparsity(s, k) == knn_sparsity_bruteforce(s, k));
        }
    }
}

TEST_CASE("refinement splits the sparsest primitive into two layers") {
    Scene s;
    for (int i = 0; i < 10; ++i) {
        GaussianPrimitive p = at_origin(0.5);
        p.mean = Vec3(0.01 * i, 0.02 * i, 0.0);
        s.push_back(p);
    }
    GaussianPrimitive loner = at_origin(0.9);
    s.push_back(loner);
    s.primitives.back().mean = Vec3::Zero();
    // Move the cluster away so the origin primitive is the sparsest.
    for (int i = 0; i < 10; ++i) s.primitives[i].mean += Vec3(3.0, 0.0, 0.0);

    SUBCASE("fraction zero changes nothing") {
        CHECK(refine_sparse(s, nullptr, 0.0, 3).empty());
        CHECK(s.size() == 11);
    }
    SUBCASE("one split") {
        const double before = center_alpha_exact(s);
        OptimizerState st(11);
        st.rows[10].adam_v.fill(2.0);
        const auto log = refine_sparse(s, &st, 0.05, 3, 7);
        REQUIRE(log.size() == 1);
        CHECK(log[0].source == 10);
        CHECK(log[0].id == 11);
        CHECK(log[0].op == "split");
        CHECK(s.size() == 12);
        CHECK(st.rows.size() == 12);
        CHECK(st.rows[10].adam_v[0] == 0.0);
        CHECK(pack_params(s.primitives[10]) == pack_params(s.primitives[11]));
        CHECK(s.primitives[10].opacity() == doctest::Approx(0.683772).epsilon(1e-6));
        const double c = std::exp(2.0 * (s.primitives[10].log_scale[0] - loner.log_scale[0]));
        CHECK(c == doctest::Approx(0.7534).epsilon(1e-4));
        CHECK(std::abs(center_alpha_exact(s) - before) < 1e-12);
    }
}

TEST_CASE("mutation log is one json object per line") {
    MutationLog log = {{100, "relocate", 4, 2, 0.5, 0.0}, {200, "prune", 7, -1, 0.0, 0.25}};
    std::ostringstream out;
    write_mutation_log(out, log);
    std::istringstream in(out.str());
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["op"] == "relocate");
    CHECK(rows[0]["source"] == 2);
    CHECK(rows[1]["score"] == 0.25);
    CHECK(rows[1]["iter"] == 200);
}
