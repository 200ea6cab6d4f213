#pragma once

#include "dgs/config.hpp"
#include "dgs/gaussian.hpp"
#include "dgs/image.hpp"
#include "dgs/lifecycle.hpp"
#include "dgs/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dgs {

struct StageFlags {
    bool exploration = true;     // Langevin noise on means
    bool momentum = true;        // momentum drift on means
    bool spatial_denoise = true; // R Δμ correction on means
    bool relocation = true;
    bool prune = true;
    bool refine = true;

    bool any_mean_term() const { return exploration || momentum || spatial_denoise; }
    static StageFlags none() { return {false, false, false, false, false, false}; }
};

struct TrainConfig {
    std::int64_t max_steps = 2000;
    std::uint64_t seed = 0;
    double lambda_ssim = 0.2;
    Vec3 background = Vec3::Zero();
    std::int64_t eval_interval = 100;
    int holdout_every = 8;
    std::int64_t relocation_interval = 100;
    double opacity_floor = 0.005;
    double prune_fraction = 0.10;
    double prune_at = 0.8;
    double densify_fraction = 0.0005;
    int refinement_rounds = 5;
    double refine_start = 0.6;
    double refine_end = 0.9;
    int knn_k = 3;
    // Mean rates are multiplied by the scene extent at the start of training.
    LearningRates lr;
    AdamConfig adam;
    ExploreConfig explore;
    // Negative: derive τ so that sqrt(2 lr_mean_init τ) = noise_step · extent.
    double tau = -1.0;
    double noise_step = 5e-4;
    StageFlags stages;
    int threads = 1;

    static TrainConfig from_config(const Config &config);
    void validate() const;
    std::int64_t prune_step() const;
    std::vector<std::int64_t> refine_steps() const;
};

struct SyntheticSceneSpec {
    int primitive_count = 100;
    double extent = 2.0;
    double opacity_min = 0.6, opacity_max = 0.95;
    double scale_min = 0.06, scale_max = 0.16;
    int views = 10;
    double radius = 4.0;
    double elevation_deg = 20.0;
    double fov_deg = 50.0;
    int width = 64, height = 64;
    double init_noise = 0.05;    // mean noise σ as a fraction of extent
    double scale_jitter = 0.2;   // σ of the log-scale perturbation
    double init_outliers = 0.0;  // extra random init primitives, as a fraction of primitive_count
    double outlier_opacity_max = 0.3;
    std::uint64_t seed = 1;
    Vec3 background = Vec3::Zero();

    static SyntheticSceneSpec from_config(const Config &config);
    void validate() const;
};

struct Dataset {
    std::vector<Camera> cameras;
    std::vector<Image> targets;

    void validate() const;
    std::vector<std::size_t> train_views(int holdout_every) const;
    std::vector<std::size_t> holdout_views(int holdout_every) const;
    // Subset in the given index order.
    Dataset select(const std::vector<std::size_t> &views) const;
};

struct SyntheticData {
    Scene ground_truth;
    Dataset data;
    Scene init;
};

SyntheticData synthesize(const SyntheticSceneSpec &spec);

/// Camera-based scene scale: 1.1 × the largest distance of a camera center
/// from the mean camera center.
double scene_extent(const std::vector<Camera> &cameras);

struct EvalReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

EvalReport evaluate(const Scene &scene, const Dataset &data, const Vec3 &background, int threads = 1);

struct MetricRow {
    std::int64_t iteration = 0;
    double l1 = 0.0, dssim = 0.0, total = 0.0;
    double psnr = 0.0, ssim = 0.0;
    std::size_t primitive_count = 0;
};

void write_metrics_csv(std::ostream &out, const std::vector<MetricRow> &rows);

struct TrainResult {
    Scene scene;
    OptimizerState state;
    std::vector<MetricRow> metrics;
    MutationLog mutations;
    std::size_t initial_count = 0;
    std::size_t pruned = 0;
    std::size_t split_added = 0;
    bool diverged = false;
    std::string error;
    double tau = 0.0;  // resolved temperature
    double extent = 0.0;
};

/// Full training run. Training uses every view not held out; metrics are
/// evaluated on held-out views (all views when there are none). On
/// divergence the returned scene is the last logged checkpoint.
TrainResult train(const Scene &init, const Dataset &data, const TrainConfig &cfg);

/// Runs the optimizer for `steps` more iterations without lifecycle events,
/// starting from an existing optimizer state (fine-tuning after pruning).
void fine_tune(Scene &scene, OptimizerState &state, const Dataset &train_data, const TrainConfig &cfg,
               std::int64_t steps);

// Checkpoint: PLY plus a text sidecar with stream ids and optimizer rows.
void save_checkpoint(const std::filesystem::path &ply, const std::filesystem::path &sidecar, const Scene &scene,
                     const OptimizerState &state);
void load_checkpoint(const std::filesystem::path &ply, const std::filesystem::path &sidecar, Scene &scene,
                     OptimizerState &state);

// Dataset directory layout: cameras.txt plus targets/view_NNN.ppm.
void save_dataset(const std::filesystem::path &dir, const Dataset &data);
Dataset load_dataset(const std::filesystem::path &dir);

} // namespace dgs
