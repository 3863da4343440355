#ifndef RVLAB_H
#define RVLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define RV_OK 0

#define RV_ERR_NULL 1

#define RV_ERR_CONFIG 2

#define RV_ERR_SINGULARITY 3

#define RV_ERR_NUMERIC 4

#define RV_ERR_IO 5

#define RV_ERR_PANIC 6

#define RV_FORWARDS 0

#define RV_BACKWARDS 1

/**
 * Parsed experiment config.
 */
typedef struct RvConfig RvConfig;

/**
 * Evolved flow with its interpolant.
 */
typedef struct RvSolution RvSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse a TOML config. On success `*out` owns a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t rv_config_parse(const char *text, struct RvConfig **out);

/**
 * Number of warnings recorded while parsing.
 *
 * # Safety
 * `cfg` must be a handle from `rv_config_parse` or null.
 */
size_t rv_config_warning_count(const struct RvConfig *cfg);

/**
 * # Safety
 * `cfg` must come from `rv_config_parse` (or be null) and not be used after.
 */
void rv_config_free(struct RvConfig *cfg);

/**
 * Evolve the flow of a config.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
int32_t rv_evolve(const struct RvConfig *cfg, struct RvSolution **out);

/**
 * Number of stored snapshots.
 *
 * # Safety
 * `sol` must be a live solution handle or null.
 */
size_t rv_solution_snapshots(const struct RvSolution *sol);

/**
 * # Safety
 * `sol` must come from `rv_evolve` (or be null) and not be used after.
 */
void rv_solution_free(struct RvSolution *sol);

/**
 * Reduced volume at orientation time `s` from the config's base point.
 * `error` may be null.
 *
 * # Safety
 * Handles must be live; `volume` must be valid, `error` valid or null.
 */
int32_t rv_reduced_volume(const struct RvConfig *cfg,
                          const struct RvSolution *sol,
                          int32_t mode,
                          double s,
                          double *volume,
                          double *error);

/**
 * Minimizing L-geodesic from `from` to `to` (each `dim` values) ending at
 * flow time `t1`. Writes the L-length, reduced distance and residual.
 *
 * # Safety
 * Handles must be live; `from`/`to` must hold `dim` values; outputs valid.
 */
int32_t rv_geodesic(const struct RvConfig *cfg,
                    const struct RvSolution *sol,
                    int32_t mode,
                    const double *from,
                    const double *to,
                    size_t dim,
                    double t1,
                    double *action,
                    double *reduced_distance,
                    double *residual);

/**
 * Full experiment. Artifacts go to `out_dir` (the config's directory when
 * null); `*exit_code` receives the run's exit status.
 *
 * # Safety
 * `cfg` must be live, `out_dir` null or NUL-terminated, `exit_code` valid.
 */
int32_t rv_run_experiment(const struct RvConfig *cfg, const char *out_dir, int32_t *exit_code);

/**
 * Message of the last failed call on this thread, or null. Free with
 * `rv_string_free`.
 */
char *rv_last_error(void);

/**
 * # Safety
 * `s` must come from this library (or be null).
 */
void rv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RVLAB_H */
