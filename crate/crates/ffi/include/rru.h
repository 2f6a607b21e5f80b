#ifndef RRU_H
#define RRU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum RruStatus {
  RRU_STATUS_OK = 0,
  RRU_STATUS_NULL_POINTER = 1,
  RRU_STATUS_INVALID_ARGUMENT = 2,
  RRU_STATUS_CONFIG = 3,
  RRU_STATUS_IO = 4,
  RRU_STATUS_BUFFER_TOO_SMALL = 5,
  RRU_STATUS_PANIC = 6,
} RruStatus;

// A parsed experiment config.
typedef struct RruConfig RruConfig;

// A reinforcement law.
typedef struct RruDist RruDist;

// A simulated ensemble.
typedef struct RruEnsemble RruEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next `rru_*` call on the same thread.
const char *rru_last_error_message(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void rru_string_free(char *s);

// # Safety
// `out` must be a valid pointer.
enum RruStatus rru_dist_new_point_mass(double value, double beta, struct RruDist **out);

// # Safety
// `out` must be a valid pointer.
enum RruStatus rru_dist_new_two_point(double beta, double mean, struct RruDist **out);

// # Safety
// `values` and `probs` must point to `len` doubles; `out` must be valid.
enum RruStatus rru_dist_new_finite_discrete(const double *values,
                                            const double *probs,
                                            size_t len,
                                            double beta,
                                            struct RruDist **out);

// # Safety
// `out` must be a valid pointer.
enum RruStatus rru_dist_new_uniform(double lo, double hi, double beta, struct RruDist **out);

// Parses a law written as `kind=two_point beta=4 mean=1`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid.
enum RruStatus rru_dist_parse(const char *text, struct RruDist **out);

// # Safety
// `dist` must come from an `rru_dist_*` constructor and not have been freed.
void rru_dist_free(struct RruDist *dist);

// Quantile at `u` in `[0, 1]`.
//
// # Safety
// `dist` must be a live handle; `out` must be valid.
enum RruStatus rru_dist_quantile(const struct RruDist *dist, double u, double *out);

// Mean, second moment and variance. Any out pointer may be null.
//
// # Safety
// `dist` must be a live handle.
enum RruStatus rru_dist_moments(const struct RruDist *dist,
                                double *mean,
                                double *second_moment,
                                double *variance);

// `E[R / (R + d)]` for `d > 0`.
//
// # Safety
// `dist` must be a live handle; `out` must be valid.
enum RruStatus rru_dist_expect_fraction(const struct RruDist *dist, double d, double *out);

// Normalized compensator increment at urn size `d`.
//
// # Safety
// `mu`, `nu` must be live handles; `out` must be valid.
enum RruStatus rru_astar(const struct RruDist *mu, const struct RruDist *nu, double d, double *out);

// Lower and upper bounds on `rru_astar`.
//
// # Safety
// `mu`, `nu` must be live handles; `lo`, `hi` must be valid.
enum RruStatus rru_astar_bounds(const struct RruDist *mu,
                                const struct RruDist *nu,
                                double d,
                                double *lo,
                                double *hi);

// Standard normal CDF.
double rru_normal_cdf(double x);

// Parses config text in the `key=value` format.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid.
enum RruStatus rru_config_parse(const char *text, struct RruConfig **out);

// Reads and parses a config file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum RruStatus rru_config_load(const char *path, struct RruConfig **out);

// Replaces the config's master seed.
//
// # Safety
// `cfg` must be a live handle.
enum RruStatus rru_config_set_seed(struct RruConfig *cfg, uint64_t seed);

// # Safety
// `cfg` must come from `rru_config_parse`/`rru_config_load` and not have
// been freed.
void rru_config_free(struct RruConfig *cfg);

// Simulates the ensemble on `workers` threads (0 means all cores).
//
// # Safety
// `cfg` must be a live handle; `out` must be valid.
enum RruStatus rru_ensemble_run(const struct RruConfig *cfg,
                                size_t workers,
                                struct RruEnsemble **out);

// # Safety
// `ens` must come from `rru_ensemble_run` and not have been freed.
void rru_ensemble_free(struct RruEnsemble *ens);

// Number of paths, or 0 for a null handle.
//
// # Safety
// `ens` must be null or a live handle.
uint64_t rru_ensemble_num_paths(const struct RruEnsemble *ens);

// Copies `Z_N` of every path into `buf`. `*written` receives the number of
// paths; if `len` is smaller, nothing is copied and `RRU_BUFFER_TOO_SMALL`
// is returned.
//
// # Safety
// `ens` must be a live handle, `buf` must hold `len` doubles and `written`
// must be valid.
enum RruStatus rru_ensemble_final_z(const struct RruEnsemble *ens,
                                    double *buf,
                                    size_t len,
                                    size_t *written);

// The ensemble summary as JSON; release with `rru_string_free`.
//
// # Safety
// `ens` must be a live handle; `out` must be valid.
enum RruStatus rru_ensemble_summary_json(const struct RruEnsemble *ens, char **out);

// Writes `paths.csv`, `summary.json` and `manifest.json` into `dir`.
//
// # Safety
// `ens` must be a live handle; `dir` must be a NUL-terminated string.
enum RruStatus rru_ensemble_write_outputs(const struct RruEnsemble *ens, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RRU_H */
