#ifndef CODES_H
#define CODES_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CodesStatus {
  CODES_STATUS_OK = 0,
  CODES_STATUS_NULL_POINTER = 1,
  CODES_STATUS_INVALID_ARGUMENT = 2,
  CODES_STATUS_IO = 3,
  CODES_STATUS_FORMAT = 4,
  CODES_STATUS_SHAPE = 5,
  CODES_STATUS_NUMERICAL = 6,
  CODES_STATUS_CONFIG = 7,
  CODES_STATUS_UNKNOWN_DATASET = 8,
  CODES_STATUS_PANIC = 9,
} CodesStatus;

typedef enum CodesSplit {
  CODES_SPLIT_TRAIN = 0,
  CODES_SPLIT_VAL = 1,
  CODES_SPLIT_TEST = 2,
} CodesSplit;

typedef enum CodesSurrogate {
  CODES_SURROGATE_FCNN = 0,
  CODES_SURROGATE_MON = 1,
  CODES_SURROGATE_LNODE = 2,
  CODES_SURROGATE_LP = 3,
} CodesSurrogate;

/**
 * Opaque dataset handle.
 */
typedef struct CodesDataset CodesDataset;

/**
 * Opaque surrogate model handle.
 */
typedef struct CodesModel CodesModel;

typedef struct CodesCounts {
  size_t n_train;
  size_t n_val;
  size_t n_test;
  size_t n_timesteps;
  size_t n_quantities;
} CodesCounts;

typedef struct CodesErrorMetrics {
  double mse;
  double mae;
  double mre;
} CodesErrorMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *codes_last_error_message(void);

/**
 * Generates a synthetic dataset. `system` is `lotka_volterra`, `simple_ode` or `simple_reaction`.
 *
 * # Safety
 * `system` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum CodesStatus codes_dataset_generate(const char *system,
                                        uint64_t seed,
                                        size_t n_train,
                                        size_t n_val,
                                        size_t n_test,
                                        size_t n_timesteps,
                                        struct CodesDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum CodesStatus codes_dataset_load(const char *path, struct CodesDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle and `path` a NUL-terminated string.
 */
enum CodesStatus codes_dataset_save(const struct CodesDataset *ds, const char *path);

/**
 * # Safety
 * `ds` must be a live dataset handle and `out` writable.
 */
enum CodesStatus codes_dataset_counts(const struct CodesDataset *ds, struct CodesCounts *out);

/**
 * Copies one split, row-major `[samples, timesteps, quantities]`, into `out` of exactly `len` values.
 *
 * # Safety
 * `ds` must be a live handle and `out` must hold `len` doubles.
 */
enum CodesStatus codes_dataset_copy_split(const struct CodesDataset *ds,
                                          enum CodesSplit split,
                                          double *out,
                                          size_t len);

/**
 * Copies the time grid (length `n_timesteps`) into `out`.
 *
 * # Safety
 * `ds` must be a live handle and `out` must hold `len` doubles.
 */
enum CodesStatus codes_dataset_time_grid(const struct CodesDataset *ds, double *out, size_t len);

/**
 * # Safety
 * `ds` must be NULL or a handle from this library not yet freed.
 */
void codes_dataset_free(struct CodesDataset *ds);

/**
 * Builds an untrained model with the default architecture for `kind`.
 *
 * # Safety
 * `out` must be a writable handle slot.
 */
enum CodesStatus codes_model_build_default(enum CodesSurrogate kind,
                                           size_t n_quantities,
                                           uint64_t seed,
                                           struct CodesModel **out);

/**
 * Builds an untrained model from a JSON surrogate spec, as returned by [`codes_model_spec_json`].
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum CodesStatus codes_model_build_json(const char *spec_json,
                                        uint64_t seed,
                                        struct CodesModel **out);

/**
 * Writes a newly allocated JSON string with the model's spec. Free it with [`codes_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CodesStatus codes_model_spec_json(const struct CodesModel *model, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void codes_string_free(char *s);

/**
 * Fits the normalization on the train split, then trains on all train samples and timesteps.
 * `final_val_loss` may be NULL.
 *
 * # Safety
 * `model` and `ds` must be live handles.
 */
enum CodesStatus codes_model_train(struct CodesModel *model,
                                   const struct CodesDataset *ds,
                                   bool log10,
                                   uint64_t seed,
                                   double *final_val_loss);

/**
 * Predicts `[n_samples, n_times, n_quantities]` trajectories into `out` from row-major `y0`.
 *
 * # Safety
 * `y0` must hold `n_samples * n_quantities` doubles, `t` `n_times` doubles and `out` `out_len` doubles.
 */
enum CodesStatus codes_model_predict(const struct CodesModel *model,
                                     const double *y0,
                                     size_t n_samples,
                                     size_t n_quantities,
                                     const double *t,
                                     size_t n_times,
                                     double *out,
                                     size_t out_len);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CodesStatus codes_model_param_count(const struct CodesModel *model, size_t *out);

/**
 * Writes the model's checkpoint directory.
 *
 * # Safety
 * `model` must be a live handle and `dir` a NUL-terminated string.
 */
enum CodesStatus codes_model_save(const struct CodesModel *model, const char *dir);

/**
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum CodesStatus codes_model_load(const char *dir, struct CodesModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void codes_model_free(struct CodesModel *model);

/**
 * Pearson correlation of two length-`n` vectors. `*defined` is false when either
 * variance vanishes, in which case `*out` is NaN.
 *
 * # Safety
 * `x` and `y` must hold `n` doubles; `out` and `defined` must be writable.
 */
enum CodesStatus codes_pearson(const double *x,
                               const double *y,
                               size_t n,
                               double *out,
                               bool *defined);

/**
 * MSE, MAE and MRE over two row-major `[n_samples, n_times, n_quantities]` tensors.
 *
 * # Safety
 * `pred` and `truth` must each hold the product of the three sizes; `out` must be writable.
 */
enum CodesStatus codes_error_metrics(const double *pred,
                                     const double *truth,
                                     size_t n_samples,
                                     size_t n_times,
                                     size_t n_quantities,
                                     struct CodesErrorMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODES_H */
