#ifndef FDP_LAB_H
#define FDP_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FdpStatus {
  FDP_STATUS_OK = 0,
  FDP_STATUS_NULL_POINTER = 1,
  FDP_STATUS_INVALID_ARGUMENT = 2,
  FDP_STATUS_INVALID_SAMPLE = 3,
  FDP_STATUS_INVALID_PROCEDURE = 4,
  FDP_STATUS_INVALID_SCENARIO = 5,
  FDP_STATUS_UNKNOWN_IDENTITY = 6,
  FDP_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * A Rust panic was caught at the boundary; report it as a bug.
   */
  FDP_STATUS_INTERNAL = 99,
} FdpStatus;

/**
 * Family of the alternative p-value distribution of a scenario.
 */
typedef enum FdpAltKind {
  /**
   * Point mass at `param`; `param = 0` is the Dirac-uniform configuration.
   */
  FDP_ALT_KIND_DIRAC = 0,
  /**
   * Uniform on `[0, param]`.
   */
  FDP_ALT_KIND_UNIFORM = 1,
  /**
   * `min(U, param)` for uniform `U`.
   */
  FDP_ALT_KIND_MIN_UNIFORM = 2,
} FdpAltKind;

/**
 * Opaque step-up procedure.
 */
typedef struct FdpProcedure FdpProcedure;

/**
 * Opaque labelled p-value vector.
 */
typedef struct FdpSample FdpSample;

/**
 * Opaque simulation scenario.
 */
typedef struct FdpScenario FdpScenario;

/**
 * Result of one step-up run.
 */
typedef struct FdpOutcome {
  size_t rejections;
  size_t false_rejections;
  /**
   * Largest critical value used, 0 when nothing is rejected.
   */
  double threshold;
  /**
   * Floored estimate of m0; NaN for non-adaptive procedures.
   */
  double m0_hat;
  /**
   * `false_rejections / rejections`, 0 when nothing is rejected.
   */
  double fdp;
} FdpOutcome;

/**
 * Monte-Carlo check of one identity.
 */
typedef struct FdpIdentityReport {
  double lhs_mean;
  double rhs_mean;
  double mean_diff;
  double se;
  double z;
  /**
   * Nonzero when `|z|` is within the pass band.
   */
  uint8_t pass;
} FdpIdentityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes, excluding the terminator.
 */
size_t fdp_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fdp_version(void);

/**
 * Benjamini-Hochberg at level `alpha`.
 */
enum FdpStatus fdp_procedure_bh(double alpha, struct FdpProcedure **out);

/**
 * Adaptive step-up with the Storey estimator at `lambda`.
 */
enum FdpStatus fdp_procedure_storey(double alpha, double lambda, struct FdpProcedure **out);

/**
 * Adaptive step-up with a fixed-weight combination of Storey estimators.
 *
 * `grid` holds `k + 1` increasing points starting at `lambda` and ending
 * at 1; `weights` holds `k` nonnegative weights summing to one.
 */
enum FdpStatus fdp_procedure_combination(double alpha,
                                         double lambda,
                                         const double *grid,
                                         size_t grid_len,
                                         const double *weights,
                                         size_t weights_len,
                                         struct FdpProcedure **out);

/**
 * As [`fdp_procedure_combination`] with the built-in data-driven weights.
 */
enum FdpStatus fdp_procedure_tail_adaptive(double alpha,
                                           double lambda,
                                           const double *grid,
                                           size_t grid_len,
                                           struct FdpProcedure **out);

/**
 * Step-up with critical values `i alpha / (m + b - a i)`.
 */
enum FdpStatus fdp_procedure_quotient(double alpha, double a, double b, struct FdpProcedure **out);

void fdp_procedure_free(struct FdpProcedure *procedure);

/**
 * Copies `m` p-values and their labels (nonzero = true null).
 */
enum FdpStatus fdp_sample_new(const double *values,
                              const uint8_t *is_null,
                              size_t m,
                              struct FdpSample **out);

void fdp_sample_free(struct FdpSample *sample);

/**
 * Runs `procedure` on `sample`.
 *
 * When `rejected` is non-null the rejected indices (ascending, 0-based)
 * are written to it; `FDP_STATUS_BUFFER_TOO_SMALL` is returned if
 * `rejected_cap` is below the rejection count, with `out` still filled.
 */
enum FdpStatus fdp_run(const struct FdpProcedure *procedure,
                       const struct FdpSample *sample,
                       struct FdpOutcome *out,
                       size_t *rejected,
                       size_t rejected_cap);

/**
 * Exact coefficient `C_{j,k}` of the moment expansion, `1 <= j <= k <= 20`.
 */
enum FdpStatus fdp_c_coefficient(size_t j, size_t k, uint64_t *out);

/**
 * Scenario with `m` hypotheses, `m1` alternatives drawn from `alt`.
 */
enum FdpStatus fdp_scenario_new(size_t m,
                                size_t m1,
                                enum FdpAltKind alt,
                                double param,
                                uint64_t seed,
                                struct FdpScenario **out);

void fdp_scenario_free(struct FdpScenario *scenario);

/**
 * Monte-Carlo check of the identity named `identity` ("fdr", "ev",
 * "moment_k2", "deterministic_k1", ...). `workers = 0` uses all cores;
 * the result does not depend on it.
 */
enum FdpStatus fdp_check_identity(const struct FdpScenario *scenario,
                                  const struct FdpProcedure *procedure,
                                  const char *identity,
                                  uint64_t replicates,
                                  size_t workers,
                                  struct FdpIdentityReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDP_LAB_H */
