#include "dgs/trainer.hpp"

#include "dgs/error.hpp"
#include "dgs/io.hpp"
#include "dgs/objective.hpp"
#include "dgs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace dgs {

namespace {

Vec3 parse_color(const std::string &text) {
    Vec3 c;
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    if (!(in >> c.x() >> c.y() >> c.z())) {
        fail(ErrorCode::Parse, "expected three comma-separated numbers, got '" + text + "'");
    }
    std::string rest;
    if (in >> rest) {
        fail(ErrorCode::Parse, "expected three comma-separated numbers, got '" + text + "'");
    }
    return c;
}

void check_fraction(double f, const char *name) {
    if (!(f >= 0.0 && f < 1.0)) {
        fail(ErrorCode::InvalidArgument, std::string(name) + " must lie in [0, 1)");
    }
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One optimizer iteration on a single view. Returns the loss report.
LossReport optimizer_step(Scene &scene, OptimizerState &state, const Camera &camera, const Image &target,
                          const TrainConfig &cfg, const LearningRates &lr) {
    RenderOptions options;
    options.background = cfg.background;
    options.threads = cfg.threads;
    const RenderOutput out = render(scene, camera, options);
    LossReport loss = compute_loss(out.rgb, target, cfg.lambda_ssim);
    if (!std::isfinite(loss.total)) {
        fail(ErrorCode::Diverged, "non-finite loss at iteration " + std::to_string(state.step_count));
    }
    const auto grads = backward(scene, camera, out, loss.d_total_d_rgb, cfg.threads);
    const std::int64_t step = state.step_count;
    const double lr_mean = lr.mean_at(step);
    const auto deltas = adam_step(state, grads, lr, cfg.adam);
    const bool mean_terms = cfg.stages.any_mean_term();
    const MeanUpdateTerms terms{cfg.stages.exploration, cfg.stages.momentum, cfg.stages.spatial_denoise};
    for (std::size_t i = 0; i < scene.size(); ++i) {
        GaussianPrimitive &p = scene.primitives[i];
        if (!mean_terms) {
            apply_param_delta(p, deltas[i], true);
            continue;
        }
        PrimitiveOptState &row = state.rows[i];
        if (cfg.stages.momentum) {
            update_momentum(row, row.prev_mean_grad, cfg.explore.beta1);
            row.prev_mean_grad = grads[i].d_mean;
        }
        const NoiseKey key{cfg.seed, scene.stream_ids[i], static_cast<std::uint64_t>(step)};
        const Vec3 mean = apply_mean_update(row, p, Vec3(deltas[i][0], deltas[i][1], deltas[i][2]),
                                            grads[i].d_mean, grads[i].d_log_scale, lr_mean, cfg.explore, terms,
                                            key);
        apply_param_delta(p, deltas[i], false);
        p.mean = mean;
    }
    return loss;
}

LearningRates scaled_rates(const TrainConfig &cfg, double extent) {
    LearningRates lr = cfg.lr;
    lr.mean_init *= extent;
    lr.mean_final *= extent;
    lr.max_steps = cfg.max_steps;
    return lr;
}

TrainConfig resolved(const TrainConfig &cfg, const Dataset &data, double *extent_out) {
    TrainConfig c = cfg;
    const double extent = scene_extent(data.cameras);
    if (c.tau < 0.0) {
        const double step = c.noise_step * extent;
        c.tau = step * step / (2.0 * c.lr.mean_init * extent);
    }
    c.explore.tau = c.tau;
    if (extent_out) *extent_out = extent;
    return c;
}

} // namespace

TrainConfig TrainConfig::from_config(const Config &config) {
    TrainConfig c;
    c.max_steps = config.get_int("train.max_steps");
    c.seed = static_cast<std::uint64_t>(config.get_int("train.seed"));
    c.lambda_ssim = config.get_double("train.lambda_ssim");
    c.background = parse_color(config.get("train.background"));
    c.eval_interval = config.get_int("train.eval_interval");
    c.holdout_every = static_cast<int>(config.get_int("train.holdout_every"));
    c.relocation_interval = config.get_int("train.relocation_interval");
    c.opacity_floor = config.get_double("train.opacity_floor");
    c.prune_fraction = config.get_double("train.prune_fraction");
    c.prune_at = config.get_double("train.prune_at");
    c.densify_fraction = config.get_double("train.densify_fraction");
    c.refinement_rounds = static_cast<int>(config.get_int("train.refinement_rounds"));
    c.refine_start = config.get_double("train.refine_start");
    c.refine_end = config.get_double("train.refine_end");
    c.knn_k = static_cast<int>(config.get_int("train.knn_k"));
    c.lr.mean_init = config.get_double("lr.mean_init");
    c.lr.mean_final = config.get_double("lr.mean_final");
    c.lr.log_scale = config.get_double("lr.scale");
    c.lr.rotation = config.get_double("lr.rotation");
    c.lr.opacity = config.get_double("lr.opacity");
    c.lr.color = config.get_double("lr.color");
    c.lr.max_steps = c.max_steps;
    c.adam.beta1 = config.get_double("adam.beta1");
    c.adam.beta2 = config.get_double("adam.beta2");
    c.adam.epsilon = config.get_double("adam.epsilon");
    c.tau = config.get("explore.tau") == "auto" ? -1.0 : config.get_double("explore.tau");
    c.noise_step = config.get_double("explore.noise_step");
    c.explore.alpha = config.get_double("explore.alpha");
    c.explore.beta1 = config.get_double("explore.beta1");
    c.explore.beta2 = config.get_double("explore.beta2");
    c.explore.gate_sharpness = config.get_double("explore.gate_k");
    c.explore.gate_threshold = config.get_double("explore.gate_t");
    c.explore.denoise_sign = config.get_double("explore.denoise_sign");
    c.stages.exploration = config.get_bool("stages.exploration");
    c.stages.momentum = config.get_bool("stages.momentum");
    c.stages.spatial_denoise = config.get_bool("stages.spatial_denoise");
    c.stages.relocation = config.get_bool("stages.relocation");
    c.stages.prune = config.get_bool("stages.prune");
    c.stages.refine = config.get_bool("stages.refine");
    c.threads = static_cast<int>(config.get_int("runtime.threads"));
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (max_steps <= 0) fail(ErrorCode::InvalidArgument, "train.max_steps must be > 0");
    if (eval_interval <= 0) fail(ErrorCode::InvalidArgument, "train.eval_interval must be > 0");
    if (relocation_interval <= 0) fail(ErrorCode::InvalidArgument, "train.relocation_interval must be > 0");
    if (holdout_every < 0) fail(ErrorCode::InvalidArgument, "train.holdout_every must be >= 0");
    check_fraction(prune_fraction, "train.prune_fraction");
    check_fraction(densify_fraction, "train.densify_fraction");
    check_fraction(opacity_floor, "train.opacity_floor");
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0))
        fail(ErrorCode::InvalidArgument, "train.lambda_ssim must lie in [0, 1]");
    if (refinement_rounds < 0) fail(ErrorCode::InvalidArgument, "train.refinement_rounds must be >= 0");
    if (knn_k < 1) fail(ErrorCode::InvalidArgument, "train.knn_k must be >= 1");
    if (!(lr.mean_init > 0.0 && lr.mean_final > 0.0))
        fail(ErrorCode::InvalidArgument, "mean learning rates must be > 0");
    if (!(noise_step >= 0.0)) fail(ErrorCode::InvalidArgument, "explore.noise_step must be >= 0");
    if (threads < 1) fail(ErrorCode::InvalidArgument, "runtime.threads must be >= 1");
    ExploreConfig e = explore;
    e.tau = std::max(tau, 0.0);
    e.validate();
    if (stages.prune) {
        const auto s = prune_step();
        if (s <= 0 || s >= max_steps)
            fail(ErrorCode::InvalidArgument, "prune point must fall strictly inside (0, max_steps)");
    }
    if (stages.refine) {
        for (auto s : refine_steps()) {
            if (s <= 0 || s >= max_steps)
                fail(ErrorCode::InvalidArgument, "refinement points must fall strictly inside (0, max_steps)");
        }
    }
}

std::int64_t TrainConfig::prune_step() const {
    return static_cast<std::int64_t>(std::llround(prune_at * static_cast<double>(max_steps)));
}

std::vector<std::int64_t> TrainConfig::refine_steps() const {
    std::vector<std::int64_t> steps;
    for (int r = 0; r < refinement_rounds; ++r) {
        const double f = refinement_rounds == 1
                             ? refine_start
                             : refine_start + (refine_end - refine_start) * r / (refinement_rounds - 1);
        steps.push_back(std::llround(f * static_cast<double>(max_steps)));
    }
    return steps;
}

SyntheticSceneSpec SyntheticSceneSpec::from_config(const Config &config) {
    SyntheticSceneSpec s;
    s.primitive_count = static_cast<int>(config.get_int("synth.primitives"));
    s.extent = config.get_double("synth.extent");
    s.opacity_min = config.get_double("synth.opacity_min");
    s.opacity_max = config.get_double("synth.opacity_max");
    s.scale_min = config.get_double("synth.scale_min");
    s.scale_max = config.get_double("synth.scale_max");
    s.views = static_cast<int>(config.get_int("synth.views"));
    s.radius = config.get_double("synth.radius");
    s.elevation_deg = config.get_double("synth.elevation_deg");
    s.fov_deg = config.get_double("synth.fov_deg");
    s.width = static_cast<int>(config.get_int("synth.width"));
    s.height = static_cast<int>(config.get_int("synth.height"));
    s.init_noise = config.get_double("synth.init_noise");
    s.scale_jitter = config.get_double("synth.scale_jitter");
    s.init_outliers = config.get_double("synth.init_outliers");
    s.outlier_opacity_max = config.get_double("synth.outlier_opacity_max");
    s.seed = static_cast<std::uint64_t>(config.get_int("synth.seed"));
    s.background = parse_color(config.get("train.background"));
    s.validate();
    return s;
}

void SyntheticSceneSpec::validate() const {
    if (primitive_count < 0) fail(ErrorCode::InvalidArgument, "synth.primitives must be >= 0");
    if (!(extent > 0.0)) fail(ErrorCode::InvalidArgument, "synth.extent must be > 0");
    if (!(opacity_min > 0.0 && opacity_min <= opacity_max && opacity_max < 1.0))
        fail(ErrorCode::InvalidArgument, "synth opacity range must satisfy 0 < min <= max < 1");
    if (!(scale_min > 0.0 && scale_min <= scale_max))
        fail(ErrorCode::InvalidArgument, "synth scale range must satisfy 0 < min <= max");
    if (views < 1) fail(ErrorCode::InvalidArgument, "synth.views must be >= 1");
    if (!(radius > 0.0)) fail(ErrorCode::InvalidArgument, "synth.radius must be > 0");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) fail(ErrorCode::InvalidArgument, "synth.fov_deg must be in (0, 180)");
    if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "synth resolution must be positive");
    if (!(init_noise >= 0.0) || !(scale_jitter >= 0.0))
        fail(ErrorCode::InvalidArgument, "synth noise levels must be >= 0");
    if (!(init_outliers >= 0.0)) fail(ErrorCode::InvalidArgument, "synth.init_outliers must be >= 0");
    if (!(outlier_opacity_max > 0.0 && outlier_opacity_max < 1.0))
        fail(ErrorCode::InvalidArgument, "synth.outlier_opacity_max must lie in (0, 1)");
}

void Dataset::validate() const {
    if (cameras.size() != targets.size()) {
        fail(ErrorCode::InvalidArgument, "dataset: camera and target counts differ");
    }
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        cameras[i].validate();
        if (targets[i].width != cameras[i].width || targets[i].height != cameras[i].height ||
            targets[i].channels != 3) {
            fail(ErrorCode::InvalidArgument, "dataset: target " + std::to_string(i) + " does not match its camera");
        }
    }
}

std::vector<std::size_t> Dataset::train_views(int holdout_every) const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        if (holdout_every <= 0 || i % holdout_every != 0) v.push_back(i);
    }
    return v;
}

std::vector<std::size_t> Dataset::holdout_views(int holdout_every) const {
    std::vector<std::size_t> v;
    if (holdout_every <= 0) return v;
    for (std::size_t i = 0; i < cameras.size(); i += holdout_every) v.push_back(i);
    return v;
}

Dataset Dataset::select(const std::vector<std::size_t> &views) const {
    Dataset d;
    for (std::size_t i : views) {
        d.cameras.push_back(cameras.at(i));
        d.targets.push_back(targets.at(i));
    }
    return d;
}

SyntheticData synthesize(const SyntheticSceneSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticData out;
    out.ground_truth.rng_seed = spec.seed;
    const double half = 0.5 * spec.extent;
    for (int i = 0; i < spec.primitive_count; ++i) {
        GaussianPrimitive p;
        for (int k = 0; k < 3; ++k) p.mean[k] = -half + spec.extent * unit(rng);
        for (int k = 0; k < 3; ++k)
            p.log_scale[k] = std::log(spec.scale_min + (spec.scale_max - spec.scale_min) * unit(rng));
        Vec4 q;
        do {
            for (int k = 0; k < 4; ++k) q[k] = normal(rng);
        } while (q.norm() < 1e-6);
        p.rotation = q.normalized();
        p.raw_opacity = logit(spec.opacity_min + (spec.opacity_max - spec.opacity_min) * unit(rng));
        for (int k = 0; k < 3; ++k) p.color[k] = unit(rng);
        out.ground_truth.push_back(p);
    }

    const double focal = 0.5 * spec.width / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
    const double elevation = spec.elevation_deg * std::numbers::pi / 180.0;
    for (int v = 0; v < spec.views; ++v) {
        const double theta = 2.0 * std::numbers::pi * v / spec.views;
        // Alternate above and below the equator so every point is seen at two elevations.
        const double phi = (v % 2 == 0) ? elevation : -elevation;
        const Vec3 eye(spec.radius * std::cos(theta) * std::cos(phi), spec.radius * std::sin(theta) * std::cos(phi),
                       spec.radius * std::sin(phi));
        Camera cam = Camera::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), Vec2(focal, focal), spec.width, spec.height);
        out.data.cameras.push_back(cam);
    }
    RenderOptions options;
    options.background = spec.background;
    for (const auto &cam : out.data.cameras) {
        out.data.targets.push_back(render(out.ground_truth, cam, options).rgb);
    }

    out.init = out.ground_truth;
    const double sigma = spec.init_noise * spec.extent;
    for (auto &p : out.init.primitives) {
        for (int k = 0; k < 3; ++k) p.mean[k] += sigma * normal(rng);
        for (int k = 0; k < 3; ++k) p.log_scale[k] += spec.scale_jitter * normal(rng);
    }
    // Spurious points of a noisy reconstruction: uniform in the volume, faint.
    const int outliers = static_cast<int>(std::llround(spec.init_outliers * spec.primitive_count));
    for (int i = 0; i < outliers; ++i) {
        GaussianPrimitive p;
        for (int k = 0; k < 3; ++k) p.mean[k] = -half + spec.extent * unit(rng);
        for (int k = 0; k < 3; ++k)
            p.log_scale[k] = std::log(spec.scale_min + (spec.scale_max - spec.scale_min) * unit(rng));
        p.rotation = Vec4(1.0, 0.0, 0.0, 0.0);
        p.raw_opacity = logit(0.01 + (spec.outlier_opacity_max - 0.01) * unit(rng));
        for (int k = 0; k < 3; ++k) p.color[k] = unit(rng);
        out.init.push_back(p);
    }
    return out;
}

double scene_extent(const std::vector<Camera> &cameras) {
    if (cameras.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const auto &c : cameras) centroid += c.center();
    centroid /= static_cast<double>(cameras.size());
    double r = 0.0;
    for (const auto &c : cameras) r = std::max(r, (c.center() - centroid).norm());
    return r > 0.0 ? 1.1 * r : 1.0;
}

EvalReport evaluate(const Scene &scene, const Dataset &data, const Vec3 &background, int threads) {
    EvalReport report;
    RenderOptions options;
    options.background = background;
    options.threads = threads;
    for (std::size_t v = 0; v < data.cameras.size(); ++v) {
        const Image rgb = render(scene, data.cameras[v], options).rgb;
        report.psnr.push_back(psnr(rgb, data.targets[v]));
        report.ssim.push_back(ssim(rgb, data.targets[v]));
    }
    if (!report.psnr.empty()) {
        double sp = 0.0, ss = 0.0;
        for (std::size_t v = 0; v < report.psnr.size(); ++v) {
            sp += report.psnr[v];
            ss += report.ssim[v];
        }
        report.mean_psnr = sp / static_cast<double>(report.psnr.size());
        report.mean_ssim = ss / static_cast<double>(report.ssim.size());
    }
    return report;
}

void write_metrics_csv(std::ostream &out, const std::vector<MetricRow> &rows) {
    out << "iteration,l1,dssim,total,psnr,ssim,primitive_count\n";
    for (const auto &r : rows) {
        out << r.iteration << ',' << format_double(r.l1) << ',' << format_double(r.dssim) << ','
            << format_double(r.total) << ',' << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
            << r.primitive_count << '\n';
    }
}

TrainResult train(const Scene &init, const Dataset &data, const TrainConfig &config) {
    config.validate();
    data.validate();
    double extent = 0.0;
    const TrainConfig cfg = resolved(config, data, &extent);
    const auto train_idx = data.train_views(cfg.holdout_every);
    if (train_idx.size() < 2) {
        fail(ErrorCode::InvalidArgument, "training needs at least 2 non-held-out views");
    }
    const Dataset train_data = data.select(train_idx);
    const auto hold_idx = data.holdout_views(cfg.holdout_every);
    const Dataset eval_data = hold_idx.empty() ? train_data : data.select(hold_idx);
    const LearningRates lr = scaled_rates(cfg, extent);

    TrainResult result;
    result.scene = init;
    if (result.scene.stream_ids.size() != result.scene.size()) result.scene.reset_stream_ids();
    result.state = OptimizerState(result.scene.size());
    result.initial_count = result.scene.size();
    result.tau = cfg.tau;
    result.extent = extent;
    std::mt19937_64 lifecycle_rng(mix64(cfg.seed ^ 0x6c69666563796331ULL));

    const std::int64_t prune_step = cfg.stages.prune ? cfg.prune_step() : -1;
    const std::vector<std::int64_t> refine_steps = cfg.stages.refine ? cfg.refine_steps() : std::vector<std::int64_t>{};

    Scene checkpoint = result.scene;
    try {
        for (std::int64_t t = 0; t < cfg.max_steps; ++t) {
            const std::size_t v = static_cast<std::size_t>(t) % train_data.cameras.size();
            const LossReport loss =
                optimizer_step(result.scene, result.state, train_data.cameras[v], train_data.targets[v], cfg, lr);
            const std::int64_t done = t + 1;

            if (cfg.stages.relocation && done % cfg.relocation_interval == 0 && done < cfg.max_steps) {
                auto log = relocate(result.scene, &result.state, cfg.opacity_floor, lifecycle_rng, done);
                result.mutations.insert(result.mutations.end(), log.begin(), log.end());
            }
            if (done == prune_step) {
                FisherAccumulator acc(result.scene.size());
                fisher_accumulate(acc, result.scene, train_data.cameras, train_data.targets, cfg.background,
                                  cfg.threads);
                const auto scores = uncertainty_scores(acc);
                const auto removed = prune_uncertain(result.scene, &result.state, scores, cfg.prune_fraction);
                for (std::size_t id : removed) {
                    result.mutations.push_back({done, "prune", static_cast<std::int64_t>(id), -1, 0.0, scores[id].u});
                }
                result.pruned += removed.size();
            }
            for (std::int64_t s : refine_steps) {
                if (s != done || result.scene.size() <= static_cast<std::size_t>(cfg.knn_k)) continue;
                auto log = refine_sparse(result.scene, &result.state, cfg.densify_fraction, cfg.knn_k, done);
                result.split_added += log.size();
                result.mutations.insert(result.mutations.end(), log.begin(), log.end());
            }

            if (done % cfg.eval_interval == 0 || done == cfg.max_steps) {
                const EvalReport ev = evaluate(result.scene, eval_data, cfg.background, cfg.threads);
                result.metrics.push_back(
                    {done, loss.l1, loss.dssim, loss.total, ev.mean_psnr, ev.mean_ssim, result.scene.size()});
                checkpoint = result.scene;
            }
        }
    } catch (const Error &e) {
        if (e.code() != ErrorCode::Diverged) throw;
        result.diverged = true;
        result.error = e.what();
        result.scene = checkpoint;
        result.state = OptimizerState(checkpoint.size());
    }
    return result;
}

void fine_tune(Scene &scene, OptimizerState &state, const Dataset &train_data, const TrainConfig &config,
               std::int64_t steps) {
    train_data.validate();
    if (train_data.cameras.empty()) {
        fail(ErrorCode::InvalidArgument, "fine_tune: no views");
    }
    if (state.rows.size() != scene.size()) {
        fail(ErrorCode::InvalidArgument, "fine_tune: optimizer state does not match scene");
    }
    double extent = 0.0;
    const TrainConfig cfg = resolved(config, train_data, &extent);
    const LearningRates lr = scaled_rates(cfg, extent);
    for (std::int64_t t = 0; t < steps; ++t) {
        const std::size_t v = static_cast<std::size_t>(t) % train_data.cameras.size();
        optimizer_step(scene, state, train_data.cameras[v], train_data.targets[v], cfg, lr);
    }
}

void save_checkpoint(const std::filesystem::path &ply, const std::filesystem::path &sidecar, const Scene &scene,
                     const OptimizerState &state) {
    write_ply(ply, scene);
    std::ofstream out(sidecar);
    if (!out) {
        fail(ErrorCode::Io, "cannot open " + sidecar.string() + " for writing");
    }
    out << std::setprecision(17);
    out << "step_count " << state.step_count << "\n";
    out << "rng_seed " << scene.rng_seed << "\n";
    out << "next_stream_id " << scene.next_stream_id << "\n";
    out << "rows " << state.rows.size() << "\n";
    for (std::size_t i = 0; i < state.rows.size(); ++i) {
        const auto &r = state.rows[i];
        out << (i < scene.stream_ids.size() ? scene.stream_ids[i] : i);
        for (double v : r.adam_m) out << ' ' << v;
        for (double v : r.adam_v) out << ' ' << v;
        for (int k = 0; k < 3; ++k) out << ' ' << r.explore_momentum[k];
        for (int k = 0; k < 3; ++k) out << ' ' << r.prev_mean_grad[k];
        out << '\n';
    }
}

void load_checkpoint(const std::filesystem::path &ply, const std::filesystem::path &sidecar, Scene &scene,
                     OptimizerState &state) {
    scene = read_ply(ply);
    std::ifstream in(sidecar);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + sidecar.string());
    }
    std::string tag;
    std::size_t rows = 0;
    OptimizerState st;
    in >> tag >> st.step_count >> tag >> scene.rng_seed >> tag >> scene.next_stream_id >> tag >> rows;
    if (!in || rows != scene.size()) {
        fail(ErrorCode::Parse, sidecar.string() + ": header malformed or row count does not match the PLY");
    }
    st.rows.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        auto &r = st.rows[i];
        in >> scene.stream_ids[i];
        for (double &v : r.adam_m) in >> v;
        for (double &v : r.adam_v) in >> v;
        for (int k = 0; k < 3; ++k) in >> r.explore_momentum[k];
        for (int k = 0; k < 3; ++k) in >> r.prev_mean_grad[k];
    }
    if (!in) {
        fail(ErrorCode::Parse, sidecar.string() + ": truncated optimizer rows");
    }
    state = std::move(st);
}

void save_dataset(const std::filesystem::path &dir, const Dataset &data) {
    std::filesystem::create_directories(dir / "targets");
    write_cameras(dir / "cameras.txt", data.cameras);
    for (std::size_t v = 0; v < data.targets.size(); ++v) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.ppm", v);
        write_ppm(dir / "targets" / name, data.targets[v], PpmDepth::Bits16);
    }
}

Dataset load_dataset(const std::filesystem::path &dir) {
    Dataset data;
    data.cameras = read_cameras(dir / "cameras.txt");
    for (std::size_t v = 0; v < data.cameras.size(); ++v) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.ppm", v);
        data.targets.push_back(read_ppm(dir / "targets" / name));
    }
    data.validate();
    return data;
}

} // namespace dgs
