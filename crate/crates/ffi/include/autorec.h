#ifndef AUTOREC_H
#define AUTOREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AutorecStatus {
  AUTOREC_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  AUTOREC_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  AUTOREC_STATUS_INVALID_UTF8 = 2,
  /**
   * The dataset file could not be read.
   */
  AUTOREC_STATUS_IO = 3,
  /**
   * The dataset could not be parsed or was empty.
   */
  AUTOREC_STATUS_PARSE = 4,
  /**
   * Malformed options, parameters or JSON.
   */
  AUTOREC_STATUS_INVALID_ARGUMENT = 5,
  AUTOREC_STATUS_UNKNOWN_ALGORITHM = 6,
  /**
   * Training or selection failed.
   */
  AUTOREC_STATUS_FAILED = 7,
  /**
   * A panic was caught at the boundary.
   */
  AUTOREC_STATUS_PANIC = 8,
} AutorecStatus;

/**
 * A loaded ratings table.
 */
typedef struct AutorecDataset AutorecDataset;

/**
 * A model fitted on a whole dataset. Keeps the dataset's id maps alive.
 */
typedef struct AutorecModel AutorecModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *autorec_version(void);

/**
 * Message of the last failed call on this thread, or "" if it succeeded.
 * The pointer stays valid until the next call into the library on this
 * thread.
 */
const char *autorec_last_error(void);

/**
 * Loads a ratings file laid out as `preset` ("ml100k", "jester",
 * "bookcrossing"); NULL selects "ml100k".
 *
 * # Safety
 * `path` and `preset` must be NULL or NUL-terminated strings; `out` must be
 * NULL or writable.
 */
enum AutorecStatus autorec_dataset_load(const char *path,
                                        const char *preset,
                                        struct AutorecDataset **out_dataset);

/**
 * Parses ratings from an in-memory buffer with an explicit layout.
 * `sep` is a literal separator, "tab" or "whitespace"; `columns` lists the
 * field roles, e.g. "user,item,rating,timestamp"; `scale` is "min,max".
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated; `out` must be NULL or
 * writable.
 */
enum AutorecStatus autorec_dataset_parse(const char *data,
                                         const char *sep,
                                         const char *columns,
                                         const char *scale,
                                         bool header,
                                         struct AutorecDataset **out_dataset);

/**
 * Writes the number of distinct users, items and ratings. Any out-pointer
 * may be NULL.
 *
 * # Safety
 * `dataset` must come from a load function and not be freed.
 */
enum AutorecStatus autorec_dataset_counts(const struct AutorecDataset *dataset,
                                          size_t *out_users,
                                          size_t *out_items,
                                          size_t *out_ratings);

/**
 * # Safety
 * `dataset` must be NULL or come from a load function, and is invalid
 * afterwards. Models fitted on it stay usable.
 */
void autorec_dataset_free(struct AutorecDataset *dataset);

/**
 * Cross-validates `algorithm` with `params_json` (an object of
 * hyperparameters, NULL for defaults) over `cv_folds` folds and writes mean
 * RMSE and MAE. Either out-pointer may be NULL.
 *
 * # Safety
 * `dataset` must be live; strings NUL-terminated or NULL where allowed.
 */
enum AutorecStatus autorec_evaluate(const struct AutorecDataset *dataset,
                                    const char *algorithm,
                                    const char *params_json,
                                    size_t cv_folds,
                                    uint64_t seed,
                                    double *out_rmse,
                                    double *out_mae);

/**
 * Fits `algorithm` on the whole dataset.
 *
 * # Safety
 * `dataset` must be live; `out_model` NULL or writable.
 */
enum AutorecStatus autorec_model_fit(const struct AutorecDataset *dataset,
                                     const char *algorithm,
                                     const char *params_json,
                                     uint64_t seed,
                                     struct AutorecModel **out_model);

/**
 * Predicts the rating of `item` by `user` (raw ids as in the file). Unknown
 * ids still get a finite in-scale score, flagged through
 * `out_impossible`, which may be NULL.
 *
 * # Safety
 * `model` must be live; ids NUL-terminated; `out_value` writable.
 */
enum AutorecStatus autorec_model_predict(const struct AutorecModel *model,
                                         const char *user,
                                         const char *item,
                                         double *out_value,
                                         bool *out_impossible);

/**
 * # Safety
 * `model` must be NULL or come from [`autorec_model_fit`].
 */
void autorec_model_free(struct AutorecModel *model);

/**
 * Runs automated selection and writes the report as a JSON string.
 * `config_json` is an object overriding fields of the default selection
 * config (e.g. `{"max_evals_per_algorithm": 5, "time_budget": null}`); NULL
 * keeps every default.
 *
 * # Safety
 * `dataset` must be live; `out_report_json` writable. The string must be
 * released with [`autorec_string_free`].
 */
enum AutorecStatus autorec_select(const struct AutorecDataset *dataset,
                                  const char *config_json,
                                  char **out_report_json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void autorec_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOREC_H */
