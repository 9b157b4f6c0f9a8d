#ifndef UMPROX_H
#define UMPROX_H

/* Generated by cbindgen from the umprox-ffi sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum UmpStatus {
  UMP_STATUS_OK = 0,
  UMP_STATUS_NULL_POINTER = 1,
  UMP_STATUS_INVALID_UTF8 = 2,
  UMP_STATUS_INVALID_ARGUMENT = 3,
  UMP_STATUS_SOLVER_ERROR = 4,
  UMP_STATUS_LENGTH_MISMATCH = 5,
  UMP_STATUS_OUT_OF_RANGE = 6,
  UMP_STATUS_UNAVAILABLE = 7,
  UMP_STATUS_PANIC = 8,
} UmpStatus;

/**
 * A problem instance: operator, feasible set and known constants.
 */
typedef struct UmpProblem UmpProblem;

/**
 * The outcome of one solver run.
 */
typedef struct UmpReport UmpReport;

/**
 * Scalars describing a finished run.
 */
typedef struct UmpSummary {
  uint64_t iterations;
  double diameter;
  double l0;
  double final_l;
  double certificate;
  uint64_t oracle_calls;
} UmpSummary;

/**
 * One logged row of a run.
 */
typedef struct UmpRow {
  /**
   * Completed iterations.
   */
  uint64_t k;
  /**
   * Step parameter after `k` iterations.
   */
  double l;
  /**
   * Gap certificate `2D²L/k`.
   */
  double certificate;
} UmpRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if the last
 * call succeeded. The pointer stays valid until the next call into the
 * library on the same thread.
 */
const char *ump_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ump_version(void);

/**
 * Builds a problem from its JSON description, e.g.
 * `{"kind": "matrix_game", "a": [[0, 1], [-1, 0]]}`.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
enum UmpStatus ump_problem_from_json(const char *json, struct UmpProblem **out);

/**
 * Releases a problem. Null is ignored.
 *
 * # Safety
 * `problem` must be null or a handle from [`ump_problem_from_json`] that
 * has not been freed.
 */
void ump_problem_free(struct UmpProblem *problem);

/**
 * Dimension of the problem, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t ump_problem_dim(const struct UmpProblem *problem);

/**
 * Euclidean diameter of the feasible set.
 *
 * # Safety
 * `problem` must be null or a live handle; `out` must be null or writable.
 */
enum UmpStatus ump_problem_diameter(const struct UmpProblem *problem, double *out);

/**
 * Projects `y` onto the feasible set, writing the result to `out`.
 * Both arrays have length `len`, the problem dimension.
 *
 * # Safety
 * `y` must point to `len` readable and `out` to `len` writable doubles.
 */
enum UmpStatus ump_project(const struct UmpProblem *problem,
                           const double *y,
                           double *out,
                           size_t len);

/**
 * Runs the deterministic method for `iterations` steps from the default
 * start.
 *
 * # Safety
 * `problem` must be null or a live handle; `out` must be null or writable.
 */
enum UmpStatus ump_solve(const struct UmpProblem *problem,
                         uint64_t iterations,
                         struct UmpReport **out);

/**
 * Runs the stochastic method with Gaussian noise of level `sigma` on the
 * operator, using the given seed.
 *
 * # Safety
 * `problem` must be null or a live handle; `out` must be null or writable.
 */
enum UmpStatus ump_solve_stochastic(const struct UmpProblem *problem,
                                    uint64_t iterations,
                                    double sigma,
                                    uint64_t seed,
                                    struct UmpReport **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must be null or a handle from a solve call that has not been
 * freed.
 */
void ump_report_free(struct UmpReport *report);

/**
 * Final scalars of a run.
 *
 * # Safety
 * `report` must be null or a live handle; `out` must be null or writable.
 */
enum UmpStatus ump_report_summary(const struct UmpReport *report, struct UmpSummary *out);

/**
 * Number of logged rows, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t ump_report_row_count(const struct UmpReport *report);

/**
 * Logged row `index`.
 *
 * # Safety
 * `report` must be null or a live handle; `out` must be null or writable.
 */
enum UmpStatus ump_report_row(const struct UmpReport *report, size_t index, struct UmpRow *out);

/**
 * Copies the averaged iterate `ŵ` into `out` of length `len`.
 *
 * # Safety
 * `report` must be null or a live handle; `out` must point to `len`
 * writable doubles.
 */
enum UmpStatus ump_report_average(const struct UmpReport *report, double *out, size_t len);

/**
 * Exact restricted gap of the report's averaged iterate. Returns
 * `Unavailable` for problems without a closed-form gap.
 *
 * # Safety
 * Handles must be null or live; `out` must be null or writable.
 */
enum UmpStatus ump_report_exact_gap(const struct UmpProblem *problem,
                                    const struct UmpReport *report,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UMPROX_H */
