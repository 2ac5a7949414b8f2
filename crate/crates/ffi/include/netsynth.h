#ifndef NETSYNTH_H
#define NETSYNTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_UTF8 = 2,
  NS_STATUS_PARSE = 3,
  NS_STATUS_VALIDATION = 4,
  NS_STATUS_INVALID_ARGUMENT = 5,
  NS_STATUS_INFEASIBLE = 6,
  NS_STATUS_VERIFICATION_FAILED = 7,
  NS_STATUS_SIZE_GUARD = 8,
  NS_STATUS_SOLVER = 9,
  NS_STATUS_IO = 10,
  NS_STATUS_BUFFER_TOO_SMALL = 11,
  NS_STATUS_PANIC = 99,
} NsStatus;

typedef enum NsMode {
  NS_MODE_KRON = 0,
  NS_MODE_BLOCKDIAG = 1,
  NS_MODE_FULL = 2,
} NsMode;

/**
 * Opaque synthesis result.
 */
typedef struct NsResult NsResult;

/**
 * Opaque network description.
 */
typedef struct NsSystem NsSystem;

/**
 * Synthesis settings. Non-positive gamma bounds and epsilon select the library defaults.
 */
typedef struct NsOptions {
  double gamma_lo;
  double gamma_hi;
  double bisect_tol;
  double epsilon;
  /**
   * Nonzero: multiplier condition only at the extreme eigenvalues.
   */
  int32_t multiplier_extremes;
} NsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ns_last_error(void);

/**
 * Library version, static storage.
 */
const char *ns_version(void);

struct NsOptions ns_options_default(void);

/**
 * Parses a JSON system description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NsStatus ns_system_from_json(const char *json, struct NsSystem **out);

/**
 * Loads a bundled system by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NsStatus ns_system_fixture(const char *name, struct NsSystem **out);

/**
 * # Safety
 * `sys` must come from this library and not be used afterwards. Null is ignored.
 */
void ns_system_free(struct NsSystem *sys);

/**
 * Number of subsystems, states and inputs per subsystem.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NsStatus ns_system_dims(const struct NsSystem *sys,
                             size_t *n_subsystems,
                             size_t *n_states,
                             size_t *n_inputs);

/**
 * Synthesises and verifies a controller. `options` may be null for defaults.
 *
 * # Safety
 * `sys` must be a live handle, `options` null or valid, `out` valid.
 */
enum NsStatus ns_synthesize(const struct NsSystem *sys,
                            enum NsMode mode,
                            const struct NsOptions *options,
                            struct NsResult **out);

/**
 * # Safety
 * `res` must come from this library and not be used afterwards. Null is ignored.
 */
void ns_result_free(struct NsResult *res);

/**
 * Certified and verified γ.
 *
 * # Safety
 * `res` must be a live handle; output pointers may be null.
 */
enum NsStatus ns_result_gamma(const struct NsResult *res, double *certified, double *verified);

/**
 * Copies K^d and K^i (n_u × n each, row-major) into buffers of `len` doubles.
 *
 * # Safety
 * `res` must be a live handle and both buffers must hold `len` doubles.
 */
enum NsStatus ns_result_gains(const struct NsResult *res, double *k_d, double *k_i, size_t len);

/**
 * Full result as JSON. Free the string with [`ns_string_free`].
 *
 * # Safety
 * `res` must be a live handle and `out` valid.
 */
enum NsStatus ns_result_to_json(const struct NsResult *res, char **out);

/**
 * # Safety
 * `s` must come from this library. Null is ignored.
 */
void ns_string_free(char *s);

/**
 * H∞ norm of the network closed under u = (I⊗K^d + P⊗K^i)x; +∞ if unstable.
 *
 * # Safety
 * `sys` must be a live handle, `k_d` and `k_i` must hold n_u·n doubles, `norm` valid.
 */
enum NsStatus ns_closed_loop_hinf(const struct NsSystem *sys,
                                  const double *k_d,
                                  const double *k_i,
                                  double *norm);

/**
 * Checks that the gains stabilise the network with H∞ norm at most γ.
 * Returns `Ok` and sets `passed` to 0 or 1.
 *
 * # Safety
 * As for [`ns_closed_loop_hinf`]; `passed` valid.
 */
enum NsStatus ns_verify(const struct NsSystem *sys,
                        const double *k_d,
                        const double *k_i,
                        double gamma,
                        int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETSYNTH_H */
