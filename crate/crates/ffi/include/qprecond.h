#ifndef QPRECOND_H
#define QPRECOND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Optimizer mode of a report cell.
 */
typedef enum QpMode {
  QP_MODE_HYBRID = 0,
  QP_MODE_CLASSICAL = 1,
} QpMode;

/**
 * Result code of every fallible call.
 */
typedef enum QpStatus {
  QP_STATUS_OK = 0,
  QP_STATUS_NULL_POINTER = 1,
  QP_STATUS_INVALID_ARGUMENT = 2,
  QP_STATUS_CONFIG = 3,
  QP_STATUS_NO_CAPTURE = 4,
  QP_STATUS_RUNTIME = 5,
  QP_STATUS_IO = 6,
  QP_STATUS_PANIC = 7,
} QpStatus;

/**
 * Opaque battery configuration.
 */
typedef struct QpConfig QpConfig;

/**
 * Opaque benchmark objective.
 */
typedef struct QpObjective QpObjective;

/**
 * Opaque battery report.
 */
typedef struct QpReport QpReport;

/**
 * Opaque seed point and search box.
 */
typedef struct QpSeedBox QpSeedBox;

/**
 * Aggregates of one report cell. `median_bfgs_correct` is NaN when no
 * trial in the cell was correct.
 */
typedef struct QpCellStats {
  enum QpMode mode;
  size_t dims;
  size_t budget;
  size_t trials;
  size_t n_correct;
  double median_bfgs_correct;
} QpCellStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. The pointer stays valid until the next call into the
 * library on the same thread.
 */
const char *qp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qp_version(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void qp_string_free(char *s);

/**
 * Creates a benchmark objective by name (`rastrigin`, `ackley`,
 * `himmelblau`) and dimension.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum QpStatus qp_objective_new(const char *name, size_t dims, struct QpObjective **out);

/**
 * Releases an objective. NULL is ignored.
 *
 * # Safety
 * `obj` must come from [`qp_objective_new`] and not have been freed.
 */
void qp_objective_free(struct QpObjective *obj);

/**
 * Dimension of the objective, 0 for NULL.
 *
 * # Safety
 * `obj` must be NULL or a live objective handle.
 */
size_t qp_objective_dims(const struct QpObjective *obj);

/**
 * Evaluates the objective at `x[0..len]`.
 *
 * # Safety
 * `obj` must be a live handle, `x` must point to `len` doubles and `out`
 * must be writable.
 */
enum QpStatus qp_objective_eval(const struct QpObjective *obj,
                                const double *x,
                                size_t len,
                                double *out);

/**
 * Copies the search bounds into `lb` and `ub`, each holding `len` doubles.
 * Either output may be NULL.
 *
 * # Safety
 * `obj` must be a live handle and non-NULL outputs must hold `len` doubles.
 */
enum QpStatus qp_objective_bounds(const struct QpObjective *obj,
                                  double *lb,
                                  double *ub,
                                  size_t len);

/**
 * Trains one register fragment per dimension and returns the seed point
 * with its search box. `qubits` is the register width per dimension and
 * `budget` the evaluation budget of each fragment; the remaining settings
 * take their defaults.
 *
 * # Safety
 * `obj` must be a live handle and `out` writable.
 */
enum QpStatus qp_precondition(const struct QpObjective *obj,
                              size_t qubits,
                              size_t budget,
                              uint64_t seed,
                              struct QpSeedBox **out);

/**
 * Releases a seed box. NULL is ignored.
 *
 * # Safety
 * `sb` must come from [`qp_precondition`] and not have been freed.
 */
void qp_seedbox_free(struct QpSeedBox *sb);

/**
 * Dimension of the seed box, 0 for NULL.
 *
 * # Safety
 * `sb` must be NULL or a live seed box handle.
 */
size_t qp_seedbox_dims(const struct QpSeedBox *sb);

/**
 * Copies the seed point and box bounds, each into an array of `len`
 * doubles. Any output may be NULL.
 *
 * # Safety
 * `sb` must be a live handle and non-NULL outputs must hold `len` doubles.
 */
enum QpStatus qp_seedbox_get(const struct QpSeedBox *sb,
                             double *x_seed,
                             double *lb,
                             double *ub,
                             size_t len);

/**
 * Creates a battery configuration with default settings.
 *
 * # Safety
 * `out` must be writable.
 */
enum QpStatus qp_config_default(struct QpConfig **out);

/**
 * Parses a battery configuration from TOML text and validates it.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum QpStatus qp_config_from_toml(const char *toml, struct QpConfig **out);

/**
 * Releases a configuration. NULL is ignored.
 *
 * # Safety
 * `cfg` must come from this library and not have been freed.
 */
void qp_config_free(struct QpConfig *cfg);

/**
 * Runs every trial of the configured battery.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum QpStatus qp_battery_run(const struct QpConfig *cfg, struct QpReport **out);

/**
 * Releases a report. NULL is ignored.
 *
 * # Safety
 * `report` must come from [`qp_battery_run`] and not have been freed.
 */
void qp_report_free(struct QpReport *report);

/**
 * Number of cells in the report, 0 for NULL.
 *
 * # Safety
 * `report` must be NULL or a live report handle.
 */
size_t qp_report_cell_count(const struct QpReport *report);

/**
 * Aggregates of cell `index`.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum QpStatus qp_report_cell(const struct QpReport *report, size_t index, struct QpCellStats *out);

/**
 * Serializes the report to JSON. Release the string with
 * [`qp_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum QpStatus qp_report_to_json(const struct QpReport *report, char **out);

/**
 * Writes the report to `path` as `json` or `csv`, plus the box-plot file
 * next to it.
 *
 * # Safety
 * `report` must be a live handle; `path` and `format` must be
 * NUL-terminated strings.
 */
enum QpStatus qp_report_write(const struct QpReport *report, const char *path, const char *format);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QPRECOND_H */
