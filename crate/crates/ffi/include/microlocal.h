#ifndef MICROLOCAL_H
#define MICROLOCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum {
  ML_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ML_STATUS_NULL_POINTER = 1,
  /**
   * Wrong dimension, non-UTF-8 text or an out-of-range index.
   */
  ML_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The metric description was rejected.
   */
  ML_STATUS_CONFIG = 3,
  /**
   * The phase point lies outside the domain of the requested quantity.
   */
  ML_STATUS_DOMAIN = 4,
  /**
   * Any other failure of the computation.
   */
  ML_STATUS_COMPUTATION = 5,
  /**
   * The library panicked; this is a bug.
   */
  ML_STATUS_PANIC = 6,
} MlStatus;

typedef enum {
  ML_ORIENTATION_INCOMING = 0,
  ML_ORIENTATION_OUTGOING = 1,
} MlOrientation;

/**
 * Opaque cometric handle.
 */
typedef struct MlCometric MlCometric;

/**
 * Opaque trajectory handle.
 */
typedef struct MlTrajectory MlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ml_version(void);

/**
 * Copies the message of the last failure on this thread into `buf`
 * (truncated, always NUL-terminated when `len > 0`). Returns the full
 * message length without the terminator, or 0 if the last call succeeded.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ml_last_error_message(char *buf, size_t len);

/**
 * Builds a cometric from its JSON description (the `metric` block of a run
 * configuration).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for a write.
 */
MlStatus ml_cometric_from_json(const char *json, MlCometric **out);

/**
 * Flat Minkowski cometric `diag(1, -1, ..., -1)` in dimension `n`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
MlStatus ml_cometric_minkowski(size_t n, MlCometric **out);

/**
 * Releases a cometric; null is ignored.
 *
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void ml_cometric_free(MlCometric *g);

/**
 * # Safety
 * `g` must be a live handle; `out` must be valid for a write.
 */
MlStatus ml_cometric_dim(const MlCometric *g, size_t *out);

/**
 * `p2(x, xi) = g(x) xi . xi`.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles; `out` must be valid for a write.
 */
MlStatus ml_principal_symbol(const MlCometric *g,
                             const double *x,
                             const double *xi,
                             size_t n,
                             double *out);

/**
 * Direction cosine between `x` and the group velocity of `xi`.
 *
 * # Safety
 * As for [`ml_principal_symbol`].
 */
MlStatus ml_beta(const MlCometric *g, const double *x, const double *xi, size_t n, double *out);

/**
 * Escape time `tau` for the given orientation; [`MlStatus::Domain`] outside
 * its cone.
 *
 * # Safety
 * As for [`ml_principal_symbol`].
 */
MlStatus ml_tau(const MlCometric *g,
                const double *x,
                const double *xi,
                size_t n,
                MlOrientation orientation,
                double sigma_inf,
                double *out);

/**
 * Gradient of `tau`; `dx` and `dxi` receive `n` doubles each.
 *
 * # Safety
 * `x`, `xi`, `dx` and `dxi` must hold `n` doubles.
 */
MlStatus ml_grad_tau(const MlCometric *g,
                     const double *x,
                     const double *xi,
                     size_t n,
                     MlOrientation orientation,
                     double sigma_inf,
                     double *dx,
                     double *dxi);

/**
 * Integrates the Hamilton flow of `p2` over `[t_minus, t_plus]` with the
 * default tolerances.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles; `out` must be valid for a write.
 */
MlStatus ml_flow_integrate(const MlCometric *g,
                           const double *x,
                           const double *xi,
                           size_t n,
                           double t_minus,
                           double t_plus,
                           MlTrajectory **out);

/**
 * Number of stored samples.
 *
 * # Safety
 * `tr` must be a live handle; `out` must be valid for a write.
 */
MlStatus ml_trajectory_len(const MlTrajectory *tr, size_t *out);

/**
 * Sample `k`: time, position and momentum (`x` and `xi` receive the
 * dimension's worth of doubles).
 *
 * # Safety
 * `t` must be valid for a write; `x` and `xi` for `dim` doubles each.
 */
MlStatus ml_trajectory_sample(const MlTrajectory *tr, size_t k, double *t, double *x, double *xi);

/**
 * Releases a trajectory; null is ignored.
 *
 * # Safety
 * `tr` must come from this library and not be used afterwards.
 */
void ml_trajectory_free(MlTrajectory *tr);

/**
 * Runs the command-line driver with `argv[0..argc]` (program name first)
 * and returns its exit status: 0 pass, 1 check failed, 2 configuration
 * error, 3 computation error. Null or non-UTF-8 arguments give 2.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings.
 */
int ml_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICROLOCAL_H */
