#ifndef CONCENTRATION_H
#define CONCENTRATION_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ConcStatus {
  ConcStatus_Ok = 0,
  ConcStatus_InvalidParameter = 1,
  ConcStatus_PMaxTooSmall = 2,
  ConcStatus_Quadrature = 3,
  ConcStatus_Divergent = 4,
  ConcStatus_HypothesisNotMet = 5,
  ConcStatus_Precondition = 6,
  ConcStatus_CapExceeded = 7,
  ConcStatus_LengthMismatch = 8,
  ConcStatus_Unsupported = 9,
  ConcStatus_ExpectationBudget = 10,
  ConcStatus_NullPointer = 11,
  ConcStatus_InvalidUtf8 = 12,
  ConcStatus_InvalidJson = 13,
  ConcStatus_Panic = 14,
} ConcStatus;

typedef enum ConcBoundKind {
  ConcBoundKind_Thm1 = 0,
  ConcBoundKind_Thm2 = 1,
  ConcBoundKind_Thm3 = 2,
  ConcBoundKind_Thm3Psi2Variant = 3,
  ConcBoundKind_BoundedDifference = 4,
} ConcBoundKind;

/**
 * Opaque distribution handle.
 */
typedef struct ConcDistribution ConcDistribution;

/**
 * Opaque test-function handle.
 */
typedef struct ConcFunction ConcFunction;

/**
 * Opaque proxy-profile handle.
 */
typedef struct ConcProfile ConcProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *conc_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *conc_version(void);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ConcStatus conc_distribution_from_json(const char *json, struct ConcDistribution **out);

/**
 * # Safety
 * `h` must come from [`conc_distribution_from_json`] and not be used afterwards.
 */
void conc_distribution_free(struct ConcDistribution *h);

/**
 * ψ_α norm (`alpha` 1 or 2) on the default moment grid.
 *
 * # Safety
 * `h` must be a live handle; `value` a valid pointer.
 */
enum ConcStatus conc_distribution_psi_norm(const struct ConcDistribution *h,
                                           uint8_t alpha,
                                           double *value);

/**
 * Fill `out[0..count]` with draws.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold `count` doubles.
 */
enum ConcStatus conc_distribution_sample(const struct ConcDistribution *h,
                                         uint64_t seed,
                                         uintptr_t count,
                                         double *out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ConcStatus conc_function_from_json(const char *json, struct ConcFunction **out);

/**
 * # Safety
 * `h` must come from [`conc_function_from_json`] and not be used afterwards.
 */
void conc_function_free(struct ConcFunction *h);

/**
 * Analytic proxy profile of a function, as a new profile handle.
 *
 * # Safety
 * `h` must be a live handle; `out` a valid pointer.
 */
enum ConcStatus conc_function_profile(const struct ConcFunction *h, struct ConcProfile **out);

/**
 * Fill `out[0..count]` with draws of `f(X)`.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold `count` doubles.
 */
enum ConcStatus conc_function_sample(const struct ConcFunction *h,
                                     uint64_t seed,
                                     uintptr_t count,
                                     double *out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum ConcStatus conc_profile_from_json(const char *json, struct ConcProfile **out);

/**
 * # Safety
 * `h` must come from a profile constructor and not be used afterwards.
 */
void conc_profile_free(struct ConcProfile *h);

/**
 * Tail bound at `t`. Pass NaN for `p` when the kind needs none.
 *
 * # Safety
 * `h` must be a live handle; `prob` a valid pointer.
 */
enum ConcStatus conc_tail(const struct ConcProfile *h,
                          enum ConcBoundKind kind,
                          double p,
                          double t,
                          double *prob);

/**
 * Deviation at confidence `1 − δ`: exact root and additive relaxation.
 *
 * # Safety
 * `h` must be a live handle; `exact` and `additive` valid pointers.
 */
enum ConcStatus conc_invert(const struct ConcProfile *h,
                            enum ConcBoundKind kind,
                            double p,
                            double delta,
                            double *exact,
                            double *additive);

/**
 * Metric-space tail with ψ₁-diameters; `proof_consistent` selects the `L·Δ` form.
 *
 * # Safety
 * `diameters` must hold `len` doubles; `prob` a valid pointer.
 */
enum ConcStatus conc_metric_tail(double lipschitz,
                                 const double *diameters,
                                 uintptr_t len,
                                 double t,
                                 bool proof_consistent,
                                 double *prob);

/**
 * # Safety
 * `psi1` must hold `len` doubles; `out` a valid pointer.
 */
enum ConcStatus conc_vector_bound_i(const double *psi1, uintptr_t len, double delta, double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConcStatus conc_vector_bound_ii(double psi1, uintptr_t n, double delta, double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConcStatus conc_vector_bound_iii(double l2p,
                                      double psi1,
                                      double p,
                                      uintptr_t n,
                                      double delta,
                                      double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConcStatus conc_psa_bound(double psi2, uintptr_t d, uintptr_t n, double delta, double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConcStatus conc_rademacher_bound(double rad,
                                      double lipschitz,
                                      double psi1,
                                      uintptr_t n,
                                      double delta,
                                      double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConcStatus conc_regression_bound(double lipschitz,
                                      double psi1_x,
                                      double psi1_z,
                                      uintptr_t n,
                                      double delta,
                                      double *out);

/**
 * Run a verification from a JSON config. `threads = 0` uses all cores.
 * `report_json` receives a string to release with [`conc_string_free`];
 * `violation` is set to 1 when any bound is violated, else 0.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; outputs valid pointers.
 */
enum ConcStatus conc_verify(const char *config_json,
                            uintptr_t threads,
                            char **report_json,
                            int32_t *violation);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void conc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONCENTRATION_H */
