#ifndef RRIMPUTE_H
#define RRIMPUTE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_ARGUMENT = 1,
  RR_STATUS_INVALID_UTF8 = 2,
  RR_STATUS_PARSE = 3,
  RR_STATUS_SCHEMA = 4,
  RR_STATUS_CONFIG = 5,
  RR_STATUS_NUMERIC = 6,
  RR_STATUS_INSUFFICIENT_DATA = 7,
  RR_STATUS_CAPACITY = 8,
  RR_STATUS_ALIGNMENT = 9,
  RR_STATUS_OUT_OF_RANGE = 10,
  RR_STATUS_OTHER = 11,
  RR_STATUS_PANIC = 12,
} RrStatus;

/**
 * Opaque regression strategy with hyperparameters and seed.
 */
typedef struct RrRegressor RrRegressor;

/**
 * Opaque table handle: participant ids, variable names, values and mask.
 */
typedef struct RrTable RrTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *rr_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rr_string_free(char *s);

/**
 * Parses comma-separated text with a header row. `NA` and empty fields are
 * missing. `id_column` names the participant label column and may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum RrStatus rr_table_parse(const char *csv, const char *id_column, struct RrTable **out);

/**
 * Builds a table from `rows * cols` row-major values. A non-zero entry in
 * `missing` (same layout, may be null) marks the cell missing.
 *
 * # Safety
 * `values` and a non-null `missing` must point to `rows * cols` elements.
 */
enum RrStatus rr_table_new(size_t rows,
                           size_t cols,
                           const double *values,
                           const uint8_t *missing,
                           struct RrTable **out);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t rr_table_rows(const struct RrTable *table);

/**
 * Number of columns, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t rr_table_cols(const struct RrTable *table);

/**
 * Reads cell `(row, col)`. Missing cells set `*is_missing` to 1 and leave
 * `*value` untouched.
 *
 * # Safety
 * `table` must be a live handle; `value` and `is_missing` must be writable.
 */
enum RrStatus rr_table_get(const struct RrTable *table,
                           size_t row,
                           size_t col,
                           double *value,
                           uint8_t *is_missing);

/**
 * Renders the table as CSV with `NA` for missing cells. Free the result with
 * [`rr_string_free`].
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum RrStatus rr_table_to_csv(const struct RrTable *table, char **out);

/**
 * Releases a table. Null is ignored.
 *
 * # Safety
 * `table` must be null or a live handle not freed before.
 */
void rr_table_free(struct RrTable *table);

/**
 * Regressor by name (`mean`, `median`, `br`, `dt`, `et`, `knn` or a long
 * form) with default hyperparameters.
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be writable.
 */
enum RrStatus rr_regressor_new(const char *name, uint64_t seed, struct RrRegressor **out);

/**
 * Overrides one hyperparameter, e.g. `("k", "3")`. Unknown keys fail with
 * `RR_STATUS_CONFIG` and leave the regressor unchanged.
 *
 * # Safety
 * `regressor` must be a live handle; strings must be NUL-terminated.
 */
enum RrStatus rr_regressor_set_param(struct RrRegressor *regressor,
                                     const char *key,
                                     const char *value);

/**
 * Releases a regressor. Null is ignored.
 *
 * # Safety
 * `regressor` must be null or a live handle not freed before.
 */
void rr_regressor_free(struct RrRegressor *regressor);

/**
 * Imputes every missing cell. `max_rounds == 0` and negative `tol` select the
 * defaults (100 rounds, 1e-3). Writes a new table and, when `rounds_used`
 * is non-null, the number of rounds run.
 *
 * # Safety
 * Handles must be live; `out` must be writable; `rounds_used` may be null.
 */
enum RrStatus rr_impute(const struct RrTable *table,
                        const struct RrRegressor *regressor,
                        size_t max_rounds,
                        double tol,
                        struct RrTable **out,
                        size_t *rounds_used);

/**
 * Orders subsets given as `{"subsets": [...]}` JSON and writes the plan as
 * JSON. `exhaustive` non-zero requests the optimal search.
 *
 * # Safety
 * `subsets_json` must be NUL-terminated; `out` must be writable.
 */
enum RrStatus rr_order(const char *subsets_json, uint8_t exhaustive, char **out);

/**
 * Evaluates comma-separated strategies (`"br,et"`) against the mean baseline
 * and writes the report as JSON. `sample_per_variable == 0` holds out every
 * observed cell.
 *
 * # Safety
 * `table` must be a live handle; `regressors` NUL-terminated; `out` writable.
 */
enum RrStatus rr_evaluate(const struct RrTable *table,
                          const char *regressors,
                          size_t sample_per_variable,
                          uint64_t seed,
                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RRIMPUTE_H */
