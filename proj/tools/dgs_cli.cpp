// dgs: command-line front end over the libdgs C API.

#include "dgs/dgs.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CliError {
    int exit_code;
    std::string message;
};

template <class T, void (*Destroy)(T *)>
struct Deleter {
    void operator()(T *p) const { Destroy(p); }
};

using ConfigPtr = std::unique_ptr<dgs_config, Deleter<dgs_config, dgs_config_destroy>>;
using ScenePtr = std::unique_ptr<dgs_scene, Deleter<dgs_scene, dgs_scene_destroy>>;
using DatasetPtr = std::unique_ptr<dgs_dataset, Deleter<dgs_dataset, dgs_dataset_destroy>>;
using RunPtr = std::unique_ptr<dgs_run, Deleter<dgs_run, dgs_run_destroy>>;

void check(dgs_status status, int exit_code, const std::string &what) {
    if (status != DGS_OK) {
        throw CliError{exit_code, what + ": " + dgs_last_error()};
    }
}

// Config-layer failures (bad keys, bad values, unreadable config) are usage
// errors; everything after the config is resolved is a runtime failure.
void usage_check(dgs_status status, const std::string &what) { check(status, kExitUsage, what); }
void runtime_check(dgs_status status, const std::string &what) { check(status, kExitRuntime, what); }

template <class Fn>
std::string read_string(Fn &&fn) {
    std::size_t length = 0;
    runtime_check(fn(nullptr, 0, &length), "query length");
    std::string s(length + 1, '\0');
    runtime_check(fn(s.data(), s.size(), &length), "read string");
    s.resize(length);
    return s;
}

std::string config_get(const dgs_config *cfg, const std::string &key) {
    return read_string([&](char *b, std::size_t c, std::size_t *l) { return dgs_config_get(cfg, key.c_str(), b, c, l); });
}

std::string config_dump(const dgs_config *cfg) {
    return read_string([&](char *b, std::size_t c, std::size_t *l) { return dgs_config_dump(cfg, b, c, l); });
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw CliError{kExitRuntime, "cannot write " + path.string()};
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Options shared by every subcommand that reads the configuration.
struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    long long seed = -1;
    int threads = 0;

    void attach(CLI::App *sub, bool out_required) {
        sub->add_option("--config", config_path, "Configuration file (section.key = value)");
        sub->add_option("--set", overrides, "Override key=value (repeatable, applied after --config)")
            ->allow_extra_args(false);
        auto *o = sub->add_option("--out", out, "Output path");
        if (out_required) o->required();
        sub->add_option("--seed", seed, "Training seed (train.seed)");
        sub->add_option("--threads", threads, "Worker threads (default from DGS_THREADS, else 1)")
            ->check(CLI::PositiveNumber);
    }

    ConfigPtr resolve() const {
        dgs_config *raw = nullptr;
        usage_check(dgs_config_create(&raw), "config");
        ConfigPtr cfg(raw);
        if (const char *env = std::getenv("DGS_THREADS"); env && *env) {
            usage_check(dgs_config_set(cfg.get(), "runtime.threads", env), "DGS_THREADS");
        }
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) {
                throw CliError{kExitUsage, "config file not found: " + config_path};
            }
            usage_check(dgs_config_load_file(cfg.get(), config_path.c_str()), "config");
        }
        if (seed >= 0) {
            usage_check(dgs_config_set(cfg.get(), "train.seed", std::to_string(seed).c_str()), "--seed");
        }
        if (threads > 0) {
            usage_check(dgs_config_set(cfg.get(), "runtime.threads", std::to_string(threads).c_str()), "--threads");
        }
        for (const auto &o : overrides) {
            usage_check(dgs_config_apply_override(cfg.get(), o.c_str()), "--set " + o);
        }
        usage_check(dgs_config_validate(cfg.get()), "config");
        return cfg;
    }
};

ScenePtr load_scene(const std::string &path) {
    dgs_scene *raw = nullptr;
    runtime_check(dgs_scene_load_ply(path.c_str(), &raw), "load " + path);
    return ScenePtr(raw);
}

DatasetPtr load_dataset(const std::string &dir) {
    dgs_dataset *raw = nullptr;
    runtime_check(dgs_dataset_load(dir.c_str(), &raw), "load " + dir);
    return DatasetPtr(raw);
}

// Training inputs: the dataset and init from data.dir / data.init, or an
// in-memory synthetic scene when data.dir is empty.
std::pair<ScenePtr, DatasetPtr> training_inputs(const dgs_config *cfg) {
    const std::string dir = config_get(cfg, "data.dir");
    const std::string init = config_get(cfg, "data.init");
    if (dir.empty()) {
        dgs_scene *s = nullptr;
        dgs_dataset *d = nullptr;
        runtime_check(dgs_synthesize(cfg, nullptr, &s, &d), "synthesize");
        return {ScenePtr(s), DatasetPtr(d)};
    }
    const std::string init_path = init.empty() ? (fs::path(dir) / "init.ply").string() : init;
    return {load_scene(init_path), load_dataset(dir)};
}

struct RunOutcome {
    dgs_run_summary summary{};
    std::string manifest;
    bool diverged = false;
};

// Trains one configuration, writes manifest + outputs into out_dir.
RunOutcome run_training(dgs_config *cfg, const fs::path &out_dir, bool echo) {
    auto [init, data] = training_inputs(cfg);
    dgs_run *raw = nullptr;
    const dgs_status st = dgs_train(cfg, init.get(), data.get(), &raw);
    if (st != DGS_OK && st != DGS_ERR_DIVERGED) runtime_check(st, "train");
    const std::string diverge_msg = st == DGS_ERR_DIVERGED ? dgs_last_error() : "";
    RunPtr run(raw);

    RunOutcome outcome;
    runtime_check(dgs_run_summary_get(run.get(), &outcome.summary), "summary");
    outcome.diverged = st == DGS_ERR_DIVERGED;

    // The manifest pins the resolved temperature so a re-run needs nothing else.
    dgs_config *resolved_raw = nullptr;
    runtime_check(dgs_config_clone(cfg, &resolved_raw), "config");
    ConfigPtr resolved(resolved_raw);
    runtime_check(dgs_config_set(resolved.get(), "explore.tau", format_g17(outcome.summary.tau).c_str()), "tau");
    outcome.manifest = config_dump(resolved.get());

    fs::create_directories(out_dir);
    write_text(out_dir / "manifest.txt", outcome.manifest);
    runtime_check(dgs_run_write_outputs(run.get(), out_dir.string().c_str()), "write outputs");
    if (echo) {
        std::cout << "# resolved configuration\n" << outcome.manifest;
    }
    if (outcome.diverged) {
        std::cerr << "dgs: training diverged: " << diverge_msg << "\n";
    }
    return outcome;
}

void print_summary(const dgs_run_summary &s) {
    std::cout << "steps " << s.steps << "  holdout PSNR " << s.final_psnr << "  SSIM " << s.final_ssim
              << "  primitives " << s.initial_count << " -> " << s.final_count << " (pruned " << s.pruned
              << ", split " << s.split_added << ", relocated " << s.relocations << ")\n";
}

std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string axis_key(const std::string &axis) {
    if (axis == "alpha") return "explore.alpha";
    if (axis == "beta1") return "explore.beta1";
    if (axis == "beta2") return "explore.beta2";
    if (axis == "tau") return "explore.tau";
    if (axis == "sign") return "explore.denoise_sign";
    if (axis == "prune") return "train.prune_fraction";
    if (axis == "densify") return "train.densify_fraction";
    return axis;
}

// Stage-toggle grid: baseline, then each component added in turn.
std::vector<std::pair<std::string, std::vector<std::string>>> stage_grid() {
    const std::vector<std::string> off = {"stages.exploration=false", "stages.momentum=false",
                                          "stages.spatial_denoise=false", "stages.relocation=false",
                                          "stages.prune=false", "stages.refine=false"};
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    rows.push_back({"baseline", off});
    rows.push_back({"relocation", {off[0], off[1], off[2], off[4], off[5]}});
    rows.push_back({"+exploration", {off[1], off[2], off[4], off[5]}});
    rows.push_back({"+momentum", {off[2], off[4], off[5]}});
    rows.push_back({"+spatial_denoise", {off[4], off[5]}});
    rows.push_back({"+prune", {off[5]}});
    rows.push_back({"full", {}});
    return rows;
}

int cmd_synth(const CommonOptions &common, const std::string &spec) {
    CommonOptions opts = common;
    if (spec != "default") {
        if (!opts.config_path.empty()) throw CliError{kExitUsage, "use either --spec <file> or --config"};
        opts.config_path = spec;
    }
    ConfigPtr cfg = opts.resolve();
    dgs_scene *gt = nullptr, *init = nullptr;
    dgs_dataset *data = nullptr;
    runtime_check(dgs_synthesize(cfg.get(), &gt, &init, &data), "synthesize");
    ScenePtr gt_p(gt), init_p(init);
    DatasetPtr data_p(data);
    const fs::path out(opts.out);
    fs::create_directories(out);
    runtime_check(dgs_dataset_save(data, out.string().c_str()), "save dataset");
    runtime_check(dgs_scene_save_ply(gt, (out / "ground_truth.ply").string().c_str(), 0), "save ground truth");
    runtime_check(dgs_scene_save_ply(init, (out / "init.ply").string().c_str(), 0), "save init");
    write_text(out / "manifest.txt", config_dump(cfg.get()));
    std::size_t views = 0, count = 0;
    dgs_dataset_size(data, &views);
    dgs_scene_size(gt, &count);
    std::cout << "wrote " << count << " primitives and " << views << " views to " << out.string() << "\n";
    return 0;
}

int cmd_train(const CommonOptions &opts, const std::string &data_dir, const std::string &init) {
    ConfigPtr cfg = opts.resolve();
    if (!data_dir.empty()) usage_check(dgs_config_set(cfg.get(), "data.dir", data_dir.c_str()), "--data");
    if (!init.empty()) usage_check(dgs_config_set(cfg.get(), "data.init", init.c_str()), "--init");
    const RunOutcome r = run_training(cfg.get(), opts.out, true);
    print_summary(r.summary);
    return r.diverged ? kExitRuntime : 0;
}

int cmd_render(const CommonOptions &opts, const std::string &scene_path, const std::string &data_dir,
               std::size_t view, bool sixteen) {
    ConfigPtr cfg = opts.resolve();
    ScenePtr scene = load_scene(scene_path);
    DatasetPtr data = load_dataset(data_dir);
    runtime_check(dgs_render_view(cfg.get(), scene.get(), data.get(), view, opts.out.c_str(), sixteen ? 1 : 0),
                  "render");
    return 0;
}

int cmd_eval(const CommonOptions &opts, const std::string &scene_path, const std::string &data_dir, bool all) {
    ConfigPtr cfg = opts.resolve();
    ScenePtr scene = load_scene(scene_path);
    DatasetPtr data = load_dataset(data_dir);
    std::size_t views = 0;
    dgs_dataset_size(data.get(), &views);
    std::vector<double> psnr(views), ssim(views);
    double mean_psnr = 0.0, mean_ssim = 0.0;
    std::size_t n = 0;
    runtime_check(dgs_evaluate(cfg.get(), scene.get(), data.get(), all ? 0 : 1, &mean_psnr, &mean_ssim, psnr.data(),
                               ssim.data(), &n),
                  "evaluate");
    std::ostringstream csv;
    csv << "view,psnr,ssim\n";
    for (std::size_t i = 0; i < n; ++i) csv << i << ',' << format_g17(psnr[i]) << ',' << format_g17(ssim[i]) << '\n';
    csv << "mean," << format_g17(mean_psnr) << ',' << format_g17(mean_ssim) << '\n';
    std::cout << csv.str();
    if (!opts.out.empty()) write_text(opts.out, csv.str());
    return 0;
}

int cmd_prune(const CommonOptions &opts, const std::string &scene_path, const std::string &data_dir,
              double fraction) {
    ConfigPtr cfg = opts.resolve();
    ScenePtr scene = load_scene(scene_path);
    DatasetPtr data = load_dataset(data_dir);
    std::size_t removed = 0, remaining = 0;
    runtime_check(dgs_prune_uncertain(cfg.get(), scene.get(), data.get(), fraction, &removed), "prune");
    runtime_check(dgs_scene_save_ply(scene.get(), opts.out.c_str(), 0), "save");
    dgs_scene_size(scene.get(), &remaining);
    std::cout << "removed " << removed << " primitives, " << remaining << " remain\n";
    return 0;
}

int cmd_ablate(const CommonOptions &opts, const std::string &axis, const std::string &values,
               const std::string &grid) {
    ConfigPtr base = opts.resolve();
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    std::string label_name;
    if (!grid.empty()) {
        if (!axis.empty()) throw CliError{kExitUsage, "use either --grid or --axis"};
        if (grid != "stages") throw CliError{kExitUsage, "unknown grid '" + grid + "' (expected: stages)"};
        rows = stage_grid();
        label_name = "variant";
    } else {
        if (axis.empty() || values.empty()) throw CliError{kExitUsage, "ablate needs --axis and --values, or --grid"};
        const std::string key = axis_key(axis);
        for (const auto &v : split_list(values)) rows.push_back({v, {key + "=" + v}});
        label_name = key;
    }
    // Validate every variant before running any of them.
    std::vector<ConfigPtr> configs;
    for (const auto &[label, sets] : rows) {
        dgs_config *raw = nullptr;
        usage_check(dgs_config_clone(base.get(), &raw), "config");
        ConfigPtr cfg(raw);
        for (const auto &s : sets) usage_check(dgs_config_apply_override(cfg.get(), s.c_str()), label);
        usage_check(dgs_config_validate(cfg.get()), label);
        configs.push_back(std::move(cfg));
    }
    const fs::path out(opts.out);
    fs::create_directories(out);
    std::ostringstream csv;
    csv << label_name << ",run_dir,holdout_psnr,holdout_ssim,final_loss,initial_count,final_count,pruned,"
        << "split_added,relocations,diverged\n";
    bool any_diverged = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        const RunOutcome r = run_training(configs[i].get(), out / name, false);
        const auto &s = r.summary;
        csv << rows[i].first << ',' << name << ',' << format_g17(s.final_psnr) << ',' << format_g17(s.final_ssim)
            << ',' << format_g17(s.final_total_loss) << ',' << s.initial_count << ',' << s.final_count << ','
            << s.pruned << ',' << s.split_added << ',' << s.relocations << ',' << s.diverged << '\n';
        std::cout << rows[i].first << ": holdout PSNR " << s.final_psnr << " dB\n";
        any_diverged = any_diverged || r.diverged;
    }
    write_text(out / "ablation.csv", csv.str());
    return any_diverged ? kExitRuntime : 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Denoising Gaussian-splatting trainer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dgs_version()));

    CommonOptions common;
    std::string spec = "default", data_dir, init, scene, axis, values, grid;
    std::size_t view = 0;
    double fraction = 0.1;
    bool sixteen = false, all_views = false;

    auto *synth = app.add_subcommand("synth", "Generate a synthetic scene, cameras, targets and noisy init");
    common.attach(synth, true);
    synth->add_option("--spec", spec, "'default' or a config file with synth.* keys");

    auto *train = app.add_subcommand("train", "Train from a dataset (or an in-memory synthetic scene)");
    common.attach(train, true);
    train->add_option("--data", data_dir, "Dataset directory (sets data.dir)");
    train->add_option("--init", init, "Initial scene PLY (sets data.init)");

    auto *render = app.add_subcommand("render", "Render one dataset view of a scene to PPM");
    common.attach(render, true);
    render->add_option("--scene", scene, "Scene PLY")->required();
    render->add_option("--data", data_dir, "Dataset directory")->required();
    render->add_option("--view", view, "View index");
    render->add_flag("--16bit", sixteen, "Write 16-bit PPM");

    auto *eval = app.add_subcommand("eval", "PSNR/SSIM of a scene on held-out views");
    common.attach(eval, false);
    eval->add_option("--scene", scene, "Scene PLY")->required();
    eval->add_option("--data", data_dir, "Dataset directory")->required();
    eval->add_flag("--all", all_views, "Evaluate every view, not only held-out ones");

    auto *prune = app.add_subcommand("prune", "Remove the least informative primitives");
    common.attach(prune, true);
    prune->add_option("--scene", scene, "Scene PLY")->required();
    prune->add_option("--data", data_dir, "Dataset directory")->required();
    prune->add_option("--fraction", fraction, "Fraction to remove")->check(CLI::Range(0.0, 1.0));

    auto *ablate = app.add_subcommand("ablate", "Sweep one parameter or the stage grid; writes ablation.csv");
    common.attach(ablate, true);
    ablate->add_option("--axis", axis, "alpha, beta1, beta2, tau, sign, prune, densify or a full config key");
    ablate->add_option("--values", values, "Comma-separated values");
    ablate->add_option("--grid", grid, "Predefined grid: stages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(common, spec);
        if (*train) return cmd_train(common, data_dir, init);
        if (*render) return cmd_render(common, scene, data_dir, view, sixteen);
        if (*eval) return cmd_eval(common, scene, data_dir, all_views);
        if (*prune) return cmd_prune(common, scene, data_dir, fraction);
        if (*ablate) return cmd_ablate(common, axis, values, grid);
    } catch (const CliError &e) {
        std::cerr << "dgs: " << e.message << "\n";
        return e.exit_code;
    } catch (const std::exception &e) {
        std::cerr << "dgs: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
