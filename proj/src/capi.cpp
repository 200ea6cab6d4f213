#include "dgs/dgs.h"

#include "dgs/config.hpp"
#include "dgs/error.hpp"
#include "dgs/image.hpp"
#include "dgs/io.hpp"
#include "dgs/lifecycle.hpp"
#include "dgs/renderer.hpp"
#include "dgs/trainer.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

struct dgs_config {
    dgs::Config config;
};

struct dgs_scene {
    dgs::Scene scene;
};

struct dgs_dataset {
    dgs::Dataset data;
};

struct dgs_run {
    dgs::TrainResult result;
    dgs::Dataset holdout;
    dgs::Vec3 background = dgs::Vec3::Zero();
    int threads = 1;
};

namespace {

thread_local std::string g_last_error;

dgs_status to_status(dgs::ErrorCode code) {
    switch (code) {
    case dgs::ErrorCode::InvalidArgument: return DGS_ERR_INVALID_ARGUMENT;
    case dgs::ErrorCode::InvalidParameter: return DGS_ERR_INVALID_PARAMETER;
    case dgs::ErrorCode::Io: return DGS_ERR_IO;
    case dgs::ErrorCode::Parse: return DGS_ERR_PARSE;
    case dgs::ErrorCode::Diverged: return DGS_ERR_DIVERGED;
    case dgs::ErrorCode::Internal: return DGS_ERR_INTERNAL;
    }
    return DGS_ERR_INTERNAL;
}

dgs_status set_error(dgs_status status, const std::string &message) {
    g_last_error = message;
    return status;
}

template <class Fn>
dgs_status guarded(Fn &&fn) {
    try {
        fn();
        return DGS_OK;
    } catch (const dgs::Error &e) {
        return set_error(to_status(e.code()), e.what());
    } catch (const std::bad_alloc &) {
        return set_error(DGS_ERR_INTERNAL, "out of memory");
    } catch (const std::filesystem::filesystem_error &e) {
        return set_error(DGS_ERR_IO, e.what());
    } catch (const std::exception &e) {
        return set_error(DGS_ERR_INTERNAL, e.what());
    }
}

#define DGS_REQUIRE(cond, what)                                                                                   \
    do {                                                                                                          \
        if (!(cond)) return set_error(DGS_ERR_INVALID_ARGUMENT, what);                                             \
    } while (0)

void copy_out(const std::string &s, char *buffer, std::size_t capacity, std::size_t *length) {
    if (length) *length = s.size();
    if (buffer && capacity > 0) {
        const std::size_t n = std::min(capacity - 1, s.size());
        std::memcpy(buffer, s.data(), n);
        buffer[n] = '\0';
    }
}

dgs::TrainConfig train_config(const dgs_config *config) { return dgs::TrainConfig::from_config(config->config); }

} // namespace

extern "C" {

const char *dgs_last_error(void) { return g_last_error.c_str(); }

const char *dgs_version(void) { return "1.0.0"; }

const char *dgs_status_name(dgs_status status) {
    switch (status) {
    case DGS_OK: return "ok";
    case DGS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DGS_ERR_INVALID_PARAMETER: return "invalid parameter";
    case DGS_ERR_IO: return "i/o error";
    case DGS_ERR_PARSE: return "parse error";
    case DGS_ERR_DIVERGED: return "diverged";
    case DGS_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

dgs_status dgs_config_create(dgs_config **out) {
    DGS_REQUIRE(out, "dgs_config_create: out is null");
    return guarded([&] { *out = new dgs_config{}; });
}

void dgs_config_destroy(dgs_config *config) { delete config; }

dgs_status dgs_config_clone(const dgs_config *config, dgs_config **out) {
    DGS_REQUIRE(config && out, "dgs_config_clone: null argument");
    return guarded([&] { *out = new dgs_config{config->config}; });
}

dgs_status dgs_config_load_file(dgs_config *config, const char *path) {
    DGS_REQUIRE(config && path, "dgs_config_load_file: null argument");
    return guarded([&] { config->config.load_file(path); });
}

dgs_status dgs_config_load_text(dgs_config *config, const char *text) {
    DGS_REQUIRE(config && text, "dgs_config_load_text: null argument");
    return guarded([&] { config->config.load_text(text); });
}

dgs_status dgs_config_set(dgs_config *config, const char *key, const char *value) {
    DGS_REQUIRE(config && key && value, "dgs_config_set: null argument");
    return guarded([&] { config->config.set(key, value); });
}

dgs_status dgs_config_apply_override(dgs_config *config, const char *assignment) {
    DGS_REQUIRE(config && assignment, "dgs_config_apply_override: null argument");
    return guarded([&] { config->config.apply_override(assignment); });
}

dgs_status dgs_config_get(const dgs_config *config, const char *key, char *buffer, size_t capacity,
                          size_t *length) {
    DGS_REQUIRE(config && key, "dgs_config_get: null argument");
    return guarded([&] { copy_out(config->config.get(key), buffer, capacity, length); });
}

dgs_status dgs_config_dump(const dgs_config *config, char *buffer, size_t capacity, size_t *length) {
    DGS_REQUIRE(config, "dgs_config_dump: null argument");
    return guarded([&] { copy_out(config->config.dump(), buffer, capacity, length); });
}

dgs_status dgs_config_validate(const dgs_config *config) {
    DGS_REQUIRE(config, "dgs_config_validate: null argument");
    return guarded([&] {
        dgs::TrainConfig::from_config(config->config);
        dgs::SyntheticSceneSpec::from_config(config->config);
    });
}

dgs_status dgs_scene_create(dgs_scene **out) {
    DGS_REQUIRE(out, "dgs_scene_create: out is null");
    return guarded([&] { *out = new dgs_scene{}; });
}

void dgs_scene_destroy(dgs_scene *scene) { delete scene; }

dgs_status dgs_scene_load_ply(const char *path, dgs_scene **out) {
    DGS_REQUIRE(path && out, "dgs_scene_load_ply: null argument");
    return guarded([&] { *out = new dgs_scene{dgs::read_ply(path)}; });
}

dgs_status dgs_scene_save_ply(const dgs_scene *scene, const char *path, int float32) {
    DGS_REQUIRE(scene && path, "dgs_scene_save_ply: null argument");
    return guarded([&] {
        dgs::write_ply(path, scene->scene, float32 ? dgs::PlyPrecision::Float32 : dgs::PlyPrecision::Float64);
    });
}

dgs_status dgs_scene_size(const dgs_scene *scene, size_t *count) {
    DGS_REQUIRE(scene && count, "dgs_scene_size: null argument");
    *count = scene->scene.size();
    return DGS_OK;
}

dgs_status dgs_scene_get_primitive(const dgs_scene *scene, size_t index, double fields[DGS_PRIMITIVE_FIELDS]) {
    DGS_REQUIRE(scene && fields, "dgs_scene_get_primitive: null argument");
    DGS_REQUIRE(index < scene->scene.size(), "dgs_scene_get_primitive: index out of range");
    const auto &p = scene->scene.primitives[index];
    const double v[DGS_PRIMITIVE_FIELDS] = {p.mean.x(), p.mean.y(), p.mean.z(), p.color.x(), p.color.y(),
                                            p.color.z(), p.raw_opacity, p.log_scale.x(), p.log_scale.y(),
                                            p.log_scale.z(), p.rotation[0], p.rotation[1], p.rotation[2],
                                            p.rotation[3]};
    std::memcpy(fields, v, sizeof v);
    return DGS_OK;
}

dgs_status dgs_scene_add_primitive(dgs_scene *scene, const double fields[DGS_PRIMITIVE_FIELDS]) {
    DGS_REQUIRE(scene && fields, "dgs_scene_add_primitive: null argument");
    return guarded([&] {
        dgs::GaussianPrimitive p;
        p.mean = dgs::Vec3(fields[0], fields[1], fields[2]);
        p.color = dgs::Vec3(fields[3], fields[4], fields[5]);
        p.raw_opacity = fields[6];
        p.log_scale = dgs::Vec3(fields[7], fields[8], fields[9]);
        p.rotation = dgs::Vec4(fields[10], fields[11], fields[12], fields[13]);
        dgs::quat_to_rotmat(p.rotation);  // rejects zero quaternions
        scene->scene.push_back(p);
    });
}

dgs_status dgs_dataset_load(const char *dir, dgs_dataset **out) {
    DGS_REQUIRE(dir && out, "dgs_dataset_load: null argument");
    return guarded([&] { *out = new dgs_dataset{dgs::load_dataset(dir)}; });
}

dgs_status dgs_dataset_save(const dgs_dataset *data, const char *dir) {
    DGS_REQUIRE(data && dir, "dgs_dataset_save: null argument");
    return guarded([&] { dgs::save_dataset(dir, data->data); });
}

dgs_status dgs_dataset_size(const dgs_dataset *data, size_t *views) {
    DGS_REQUIRE(data && views, "dgs_dataset_size: null argument");
    *views = data->data.cameras.size();
    return DGS_OK;
}

void dgs_dataset_destroy(dgs_dataset *data) { delete data; }

dgs_status dgs_synthesize(const dgs_config *config, dgs_scene **ground_truth, dgs_scene **init,
                          dgs_dataset **data) {
    DGS_REQUIRE(config, "dgs_synthesize: null config");
    return guarded([&] {
        dgs::SyntheticData s = dgs::synthesize(dgs::SyntheticSceneSpec::from_config(config->config));
        if (ground_truth) *ground_truth = new dgs_scene{std::move(s.ground_truth)};
        if (init) *init = new dgs_scene{std::move(s.init)};
        if (data) *data = new dgs_dataset{std::move(s.data)};
    });
}

dgs_status dgs_train(const dgs_config *config, const dgs_scene *init, const dgs_dataset *data, dgs_run **out) {
    DGS_REQUIRE(config && init && data && out, "dgs_train: null argument");
    *out = nullptr;
    const dgs_status st = guarded([&] {
        const dgs::TrainConfig cfg = train_config(config);
        auto run = std::make_unique<dgs_run>();
        run->result = dgs::train(init->scene, data->data, cfg);
        const auto hold = data->data.holdout_views(cfg.holdout_every);
        run->holdout = data->data.select(hold);
        run->background = cfg.background;
        run->threads = cfg.threads;
        *out = run.release();
    });
    if (st != DGS_OK) return st;
    if ((*out)->result.diverged) {
        return set_error(DGS_ERR_DIVERGED, (*out)->result.error);
    }
    return DGS_OK;
}

void dgs_run_destroy(dgs_run *run) { delete run; }

dgs_status dgs_run_summary_get(const dgs_run *run, dgs_run_summary *summary) {
    DGS_REQUIRE(run && summary, "dgs_run_summary_get: null argument");
    const auto &r = run->result;
    dgs_run_summary s{};
    if (!r.metrics.empty()) {
        const auto &last = r.metrics.back();
        s.steps = last.iteration;
        s.final_psnr = last.psnr;
        s.final_ssim = last.ssim;
        s.final_total_loss = last.total;
    }
    s.initial_count = r.initial_count;
    s.final_count = r.scene.size();
    s.pruned = r.pruned;
    s.split_added = r.split_added;
    for (const auto &e : r.mutations) s.relocations += e.op == "relocate" ? 1 : 0;
    s.tau = r.tau;
    s.extent = r.extent;
    s.diverged = r.diverged ? 1 : 0;
    *summary = s;
    return DGS_OK;
}

dgs_status dgs_run_scene(const dgs_run *run, dgs_scene **out) {
    DGS_REQUIRE(run && out, "dgs_run_scene: null argument");
    return guarded([&] { *out = new dgs_scene{run->result.scene}; });
}

dgs_status dgs_run_metrics_csv(const dgs_run *run, char *buffer, size_t capacity, size_t *length) {
    DGS_REQUIRE(run, "dgs_run_metrics_csv: null argument");
    return guarded([&] {
        std::ostringstream ss;
        dgs::write_metrics_csv(ss, run->result.metrics);
        copy_out(ss.str(), buffer, capacity, length);
    });
}

dgs_status dgs_run_mutation_log(const dgs_run *run, char *buffer, size_t capacity, size_t *length) {
    DGS_REQUIRE(run, "dgs_run_mutation_log: null argument");
    return guarded([&] {
        std::ostringstream ss;
        dgs::write_mutation_log(ss, run->result.mutations);
        copy_out(ss.str(), buffer, capacity, length);
    });
}

dgs_status dgs_run_write_outputs(const dgs_run *run, const char *dir) {
    DGS_REQUIRE(run && dir, "dgs_run_write_outputs: null argument");
    return guarded([&] {
        const std::filesystem::path root(dir);
        std::filesystem::create_directories(root / "renders");
        dgs::save_checkpoint(root / "checkpoint.ply", root / "optimizer_state.txt", run->result.scene,
                             run->result.state);
        {
            std::ofstream csv(root / "metrics.csv", std::ios::binary);
            dgs::write_metrics_csv(csv, run->result.metrics);
            if (!csv) dgs::fail(dgs::ErrorCode::Io, "cannot write metrics.csv");
        }
        {
            std::ofstream log(root / "mutations.ndjson", std::ios::binary);
            dgs::write_mutation_log(log, run->result.mutations);
            if (!log) dgs::fail(dgs::ErrorCode::Io, "cannot write mutations.ndjson");
        }
        dgs::RenderOptions options;
        options.background = run->background;
        options.threads = run->threads;
        for (std::size_t v = 0; v < run->holdout.cameras.size(); ++v) {
            char name[40];
            std::snprintf(name, sizeof name, "holdout_%03zu.ppm", v);
            dgs::write_ppm(root / "renders" / name, dgs::render(run->result.scene, run->holdout.cameras[v], options).rgb);
        }
    });
}

dgs_status dgs_evaluate(const dgs_config *config, const dgs_scene *scene, const dgs_dataset *data, int holdout_only,
                        double *mean_psnr, double *mean_ssim, double *per_view_psnr, double *per_view_ssim,
                        size_t *evaluated_views) {
    DGS_REQUIRE(config && scene && data, "dgs_evaluate: null argument");
    return guarded([&] {
        const dgs::TrainConfig cfg = train_config(config);
        dgs::Dataset subset = data->data;
        if (holdout_only) {
            const auto hold = data->data.holdout_views(cfg.holdout_every);
            if (!hold.empty()) subset = data->data.select(hold);
        }
        const dgs::EvalReport report = dgs::evaluate(scene->scene, subset, cfg.background, cfg.threads);
        if (mean_psnr) *mean_psnr = report.mean_psnr;
        if (mean_ssim) *mean_ssim = report.mean_ssim;
        if (evaluated_views) *evaluated_views = report.psnr.size();
        for (std::size_t v = 0; v < report.psnr.size(); ++v) {
            if (per_view_psnr) per_view_psnr[v] = report.psnr[v];
            if (per_view_ssim) per_view_ssim[v] = report.ssim[v];
        }
    });
}

dgs_status dgs_render_view(const dgs_config *config, const dgs_scene *scene, const dgs_dataset *data, size_t view,
                           const char *ppm_path, int sixteen_bit) {
    DGS_REQUIRE(config && scene && data && ppm_path, "dgs_render_view: null argument");
    DGS_REQUIRE(view < data->data.cameras.size(), "dgs_render_view: view index out of range");
    return guarded([&] {
        const dgs::TrainConfig cfg = train_config(config);
        dgs::RenderOptions options;
        options.background = cfg.background;
        options.threads = cfg.threads;
        const auto out = dgs::render(scene->scene, data->data.cameras[view], options);
        dgs::write_ppm(ppm_path, out.rgb, sixteen_bit ? dgs::PpmDepth::Bits16 : dgs::PpmDepth::Bits8);
    });
}

dgs_status dgs_prune_uncertain(const dgs_config *config, dgs_scene *scene, const dgs_dataset *data,
                               double fraction, size_t *removed) {
    DGS_REQUIRE(config && scene && data, "dgs_prune_uncertain: null argument");
    return guarded([&] {
        const dgs::TrainConfig cfg = train_config(config);
        const dgs::Dataset train = data->data.select(data->data.train_views(cfg.holdout_every));
        dgs::FisherAccumulator acc(scene->scene.size());
        dgs::fisher_accumulate(acc, scene->scene, train.cameras, train.targets, cfg.background, cfg.threads);
        const auto ids = dgs::prune_uncertain(scene->scene, nullptr, dgs::uncertainty_scores(acc), fraction);
        if (removed) *removed = ids.size();
    });
}

} // extern "C"
