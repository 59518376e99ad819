#ifndef POSE2GAIT_H
#define POSE2GAIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of features per prediction row.
 */
#define P2G_NUM_FEATURES 4

/**
 * Length of the metadata vector.
 */
#define P2G_METADATA_LEN 5

typedef enum P2gStatus {
  P2G_STATUS_OK = 0,
  P2G_STATUS_NULL_POINTER = 1,
  P2G_STATUS_INVALID_ARGUMENT = 2,
  P2G_STATUS_IO = 3,
  P2G_STATUS_SCHEMA = 4,
  P2G_STATUS_DATA = 5,
  P2G_STATUS_CHECKPOINT = 6,
  P2G_STATUS_NON_FINITE = 7,
  /**
   * The walk has no ground truth.
   */
  P2G_STATUS_NOT_FOUND = 8,
  P2G_STATUS_INTERNAL = 9,
} P2gStatus;

/**
 * A trained model.
 */
typedef struct P2gModel P2gModel;

/**
 * A list of walk records.
 */
typedef struct P2gWalks P2gWalks;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *p2g_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *p2g_last_error(void);

/**
 * Read a walks file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum P2gStatus p2g_walks_read(const char *path, struct P2gWalks **out);

/**
 * # Safety
 * `walks` must come from [`p2g_walks_read`]; `path` must be NUL-terminated.
 */
enum P2gStatus p2g_walks_write(const struct P2gWalks *walks, const char *path);

/**
 * Number of records; 0 for a null handle.
 *
 * # Safety
 * `walks` must be null or come from [`p2g_walks_read`].
 */
size_t p2g_walks_len(const struct P2gWalks *walks);

/**
 * # Safety
 * `walks` must be null or come from [`p2g_walks_read`], and not be used
 * afterwards.
 */
void p2g_walks_free(struct P2gWalks *walks);

/**
 * Copy the ground truth of record `index` into `out[4]`.
 *
 * # Safety
 * `walks` must come from [`p2g_walks_read`]; `out` must hold 4 doubles.
 */
enum P2gStatus p2g_walk_truth(const struct P2gWalks *walks, size_t index, double *out);

/**
 * Write the metadata vector of record `index` into `out[P2G_METADATA_LEN]`.
 *
 * # Safety
 * `walks` must come from [`p2g_walks_read`]; `out` must hold
 * `P2G_METADATA_LEN` doubles.
 */
enum P2gStatus p2g_walk_metadata(const struct P2gWalks *walks, size_t index, double *out);

/**
 * Load a model checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` a valid pointer.
 */
enum P2gStatus p2g_model_load(const char *path, struct P2gModel **out);

/**
 * # Safety
 * `model` must be null or come from [`p2g_model_load`], and not be used
 * afterwards.
 */
void p2g_model_free(struct P2gModel *model);

/**
 * Predict every record. `out` receives `len * 4` doubles in record order
 * (step time, step width, step length, velocity); rows of walks that
 * cannot be preprocessed are NaN and counted in `*skipped` when it is not
 * null.
 *
 * # Safety
 * Handles must be valid; `out` must hold `out_len` doubles.
 */
enum P2gStatus p2g_model_predict(const struct P2gModel *model,
                                 const struct P2gWalks *walks,
                                 double *out,
                                 size_t out_len,
                                 size_t *skipped);

/**
 * Spearman's rank correlation with a two-sided p-value.
 *
 * # Safety
 * `x` and `y` must hold `n` doubles; `rho` and `p_value` must be valid.
 */
enum P2gStatus p2g_spearman(const double *x,
                            const double *y,
                            size_t n,
                            double *rho,
                            double *p_value);

/**
 * Mean absolute error.
 *
 * # Safety
 * `pred` and `truth` must hold `n` doubles; `out` must be valid.
 */
enum P2gStatus p2g_mae(const double *pred, const double *truth, size_t n, double *out);

/**
 * Weighted mean squared error over a `rows x cols` row-major batch:
 * sum of `weights[c] * (pred - target)^2` divided by `rows * cols`.
 *
 * # Safety
 * `pred` and `target` must hold `rows * cols` doubles, `weights` `cols`
 * doubles; `out` must be valid.
 */
enum P2gStatus p2g_weighted_mse(const double *pred,
                                const double *target,
                                size_t rows,
                                size_t cols,
                                const double *weights,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSE2GAIT_H */
