/*
 * C interface to the denoising Gaussian-splatting trainer.
 *
 * Objects are opaque handles created by *_create / *_load / producer calls and
 * released with the matching *_destroy. Every call returns a dgs_status; on
 * failure dgs_last_error() holds a message for the calling thread until the
 * next failing call on that thread.
 *
 * String outputs use the buffer protocol: the call writes at most `capacity`
 * bytes (including the terminator) into `buffer` and always stores the full
 * length, without terminator, in `*length`. Pass buffer = NULL to query it.
 */
#ifndef DGS_H
#define DGS_H

#include <stddef.h>
#include <stdint.h>

#if defined(DGS_BUILDING_LIBRARY)
#define DGS_API __attribute__((visibility("default")))
#else
#define DGS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgs_status {
    DGS_OK = 0,
    DGS_ERR_INVALID_ARGUMENT = 1,
    DGS_ERR_INVALID_PARAMETER = 2,
    DGS_ERR_IO = 3,
    DGS_ERR_PARSE = 4,
    DGS_ERR_DIVERGED = 5,
    DGS_ERR_INTERNAL = 6
} dgs_status;

typedef struct dgs_config dgs_config;
typedef struct dgs_scene dgs_scene;
typedef struct dgs_dataset dgs_dataset;
typedef struct dgs_run dgs_run;

/* Number of doubles per primitive in dgs_scene_get/add: x y z r g b
 * opacity_logit log_scale[3] rot_w rot_x rot_y rot_z (PLY order). */
#define DGS_PRIMITIVE_FIELDS 14

typedef struct dgs_run_summary {
    int64_t steps;
    double final_psnr;
    double final_ssim;
    double final_total_loss;
    uint64_t initial_count;
    uint64_t final_count;
    uint64_t pruned;
    uint64_t split_added;
    uint64_t relocations;
    double tau;
    double extent;
    int diverged;
} dgs_run_summary;

DGS_API const char *dgs_last_error(void);
DGS_API const char *dgs_version(void);
DGS_API const char *dgs_status_name(dgs_status status);

/* Configuration: flat `section.key = value`, every key has a default. */
DGS_API dgs_status dgs_config_create(dgs_config **out);
DGS_API void dgs_config_destroy(dgs_config *config);
DGS_API dgs_status dgs_config_clone(const dgs_config *config, dgs_config **out);
DGS_API dgs_status dgs_config_load_file(dgs_config *config, const char *path);
DGS_API dgs_status dgs_config_load_text(dgs_config *config, const char *text);
DGS_API dgs_status dgs_config_set(dgs_config *config, const char *key, const char *value);
/* "key=value" as given on a command line. */
DGS_API dgs_status dgs_config_apply_override(dgs_config *config, const char *assignment);
DGS_API dgs_status dgs_config_get(const dgs_config *config, const char *key, char *buffer, size_t capacity,
                                  size_t *length);
DGS_API dgs_status dgs_config_dump(const dgs_config *config, char *buffer, size_t capacity, size_t *length);
/* Checks that the train.* and synth.* sections parse and are in range. */
DGS_API dgs_status dgs_config_validate(const dgs_config *config);

/* Scenes. */
DGS_API dgs_status dgs_scene_create(dgs_scene **out);
DGS_API void dgs_scene_destroy(dgs_scene *scene);
DGS_API dgs_status dgs_scene_load_ply(const char *path, dgs_scene **out);
/* float32 != 0 writes single precision (lossy); the default is float64. */
DGS_API dgs_status dgs_scene_save_ply(const dgs_scene *scene, const char *path, int float32);
DGS_API dgs_status dgs_scene_size(const dgs_scene *scene, size_t *count);
DGS_API dgs_status dgs_scene_get_primitive(const dgs_scene *scene, size_t index,
                                           double fields[DGS_PRIMITIVE_FIELDS]);
DGS_API dgs_status dgs_scene_add_primitive(dgs_scene *scene, const double fields[DGS_PRIMITIVE_FIELDS]);

/* Datasets: cameras plus target images, stored as cameras.txt + targets/. */
DGS_API dgs_status dgs_dataset_load(const char *dir, dgs_dataset **out);
DGS_API dgs_status dgs_dataset_save(const dgs_dataset *data, const char *dir);
DGS_API dgs_status dgs_dataset_size(const dgs_dataset *data, size_t *views);
DGS_API void dgs_dataset_destroy(dgs_dataset *data);

/* Synthetic scene from the synth.* keys: ground truth, noisy init and views.
 * Any output pointer may be NULL. */
DGS_API dgs_status dgs_synthesize(const dgs_config *config, dgs_scene **ground_truth, dgs_scene **init,
                                  dgs_dataset **data);

/* Training. Returns DGS_ERR_DIVERGED with a valid *out holding the last
 * logged checkpoint when the loss becomes non-finite. */
DGS_API dgs_status dgs_train(const dgs_config *config, const dgs_scene *init, const dgs_dataset *data,
                             dgs_run **out);
DGS_API void dgs_run_destroy(dgs_run *run);
DGS_API dgs_status dgs_run_summary_get(const dgs_run *run, dgs_run_summary *summary);
DGS_API dgs_status dgs_run_scene(const dgs_run *run, dgs_scene **out);
DGS_API dgs_status dgs_run_metrics_csv(const dgs_run *run, char *buffer, size_t capacity, size_t *length);
DGS_API dgs_status dgs_run_mutation_log(const dgs_run *run, char *buffer, size_t capacity, size_t *length);
/* Writes checkpoint.ply, optimizer_state.txt, metrics.csv, mutations.ndjson
 * and renders/holdout_NNN.ppm into dir (created if missing). */
DGS_API dgs_status dgs_run_write_outputs(const dgs_run *run, const char *dir);

/* Evaluation on the held-out views selected by train.holdout_every (all
 * views when holdout_only == 0). per_view arrays may be NULL; otherwise they
 * need room for every evaluated view. */
DGS_API dgs_status dgs_evaluate(const dgs_config *config, const dgs_scene *scene, const dgs_dataset *data,
                                int holdout_only, double *mean_psnr, double *mean_ssim, double *per_view_psnr,
                                double *per_view_ssim, size_t *evaluated_views);

/* Renders one view of the dataset's cameras to a binary PPM. */
DGS_API dgs_status dgs_render_view(const dgs_config *config, const dgs_scene *scene, const dgs_dataset *data,
                                   size_t view, const char *ppm_path, int sixteen_bit);

/* Fisher-information pruning over the training views: removes the
 * ceil(fraction * n) primitives with the smallest uncertainty score. */
DGS_API dgs_status dgs_prune_uncertain(const dgs_config *config, dgs_scene *scene, const dgs_dataset *data,
                                       double fraction, size_t *removed);

#ifdef __cplusplus
}
#endif

#endif /* DGS_H */
