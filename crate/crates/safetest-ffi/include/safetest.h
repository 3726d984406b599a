/* C interface to the safetest anytime-valid experimentation engine. */

#ifndef SAFETEST_H
#define SAFETEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum StStatus {
  // Success; out-parameters are written.
  ST_STATUS_OK = 0,
  // A required pointer was null.
  ST_STATUS_NULL_POINTER = 1,
  // Structurally invalid input (zero counts, successes above totals).
  ST_STATUS_INVALID_INPUT = 2,
  // An argument lies outside the mathematical domain of the operation.
  ST_STATUS_DOMAIN = 3,
  // Inputs are formally valid but leave the statistic undefined, for
  // example a zero pooled variance.
  ST_STATUS_DEGENERATE = 4,
  // An internal series failed to converge within its term budget.
  ST_STATUS_NO_CONVERGENCE = 5,
  // The result would overflow double range.
  ST_STATUS_OVERFLOW = 6,
  // The design search hit its cap before the threshold became reachable.
  ST_STATUS_NOT_REACHABLE = 7,
  // An internal invariant failed; the library caught a panic.
  ST_STATUS_PANIC = 8,
} StStatus;

// Sequential sample-ratio-mismatch monitor. Opaque; create with
// `st_srm_monitor_new`, feed with `st_srm_monitor_observe`, destroy with
// `st_srm_monitor_free`.
typedef struct StSrmMonitor StSrmMonitor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Short static description of a status code, NUL-terminated, never null.
const char *st_status_message(enum StStatus status);

// Log of the Ville rejection threshold `1/alpha`. An e-process rejects its
// null at level alpha exactly when its log e-value reaches this bound.
//
// # Safety
//
// `out` must be a valid pointer to a double.
enum StStatus st_ville_log_threshold(double alpha, double *out);

// Log e-value of the safe t-test for a minimal effect `delta`, from
// per-group summary statistics (count, mean, unbiased sample variance).
// Group t is treatment, group c control; the alternative is a positive
// standardized lift of delta on t.
//
// # Safety
//
// `out` must be a valid pointer to a double.
enum StStatus st_safe_t_log_evalue(uint64_t n_t,
                                   double mean_t,
                                   double var_t,
                                   uint64_t n_c,
                                   double mean_c,
                                   double var_c,
                                   double delta,
                                   double *out);

// Smallest per-group batch size at which a sample showing exactly the
// design effect `delta` already rejects at level alpha, searched up to
// `cap`. Fails with `NOT_REACHABLE` when the cap is too small.
//
// # Safety
//
// `out_n` must be a valid pointer to a uint64_t.
enum StStatus st_safe_t_design_n(double delta, double alpha, uint64_t cap, uint64_t *out_n);

// Log of the mSPRT mixture likelihood ratio after `n` pairs with observed
// mean difference `mean_diff`, null difference `theta0`, known per-arm
// variance `sigma2`, and mixing variance `gamma2`.
//
// # Safety
//
// `out` must be a valid pointer to a double.
enum StStatus st_msprt_log_lambda(uint64_t n,
                                  double mean_diff,
                                  double theta0,
                                  double sigma2,
                                  double gamma2,
                                  double *out);

// Creates a monitor for intended treatment share `theta0`, smallest
// mismatch worth detecting `epsilon` (prior concentration
// `1/(10 epsilon^2)` per side), and level `alpha`. On success writes an
// owned handle; free it with `st_srm_monitor_free`.
//
// # Safety
//
// `out` must be a valid pointer to a handle slot.
enum StStatus st_srm_monitor_new(double theta0,
                                 double epsilon,
                                 double alpha,
                                 struct StSrmMonitor **out);

// Feeds one batch of assignment counts (treatment is the arm with intended
// share theta0) and writes the batch's log e-value contribution. The
// monitor's running evidence and rejection state advance as a side effect.
//
// # Safety
//
// `monitor` must be a live handle from `st_srm_monitor_new`; `out_log_e`
// must be a valid pointer to a double. No other thread may use the handle
// concurrently.
enum StStatus st_srm_monitor_observe(struct StSrmMonitor *monitor,
                                     uint64_t n_treatment,
                                     uint64_t n_control,
                                     double *out_log_e);

// Writes the accumulated log e-value of the monitor.
//
// # Safety
//
// `monitor` must be a live handle; `out` a valid pointer to a double.
enum StStatus st_srm_monitor_log_e(const struct StSrmMonitor *monitor, double *out);

// Writes the total assignment count at which the monitor first rejected,
// or 0 if it has not rejected. A real rejection count is never 0.
//
// # Safety
//
// `monitor` must be a live handle; `out_n` a valid pointer to a uint64_t.
enum StStatus st_srm_monitor_rejected_at(const struct StSrmMonitor *monitor, uint64_t *out_n);

// Destroys a monitor handle. Null is a no-op. The handle must not be used
// afterwards.
//
// # Safety
//
// `monitor` must be null or a live handle from `st_srm_monitor_new`, freed
// at most once.
void st_srm_monitor_free(struct StSrmMonitor *monitor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFETEST_H */
