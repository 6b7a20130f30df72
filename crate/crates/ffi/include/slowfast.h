/* C interface to the slowfast switching-time library. */

#ifndef SLOWFAST_H
#define SLOWFAST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
typedef enum SlowfastStatus {
  SlowfastStatus_Ok = 0,
  SlowfastStatus_NullPointer = 1,
  SlowfastStatus_InvalidArgument = 2,
  SlowfastStatus_NoConnection = 3,
  SlowfastStatus_QuadratureNotConverged = 4,
  SlowfastStatus_NewtonDiverged = 5,
  SlowfastStatus_StiffnessBlowup = 6,
  SlowfastStatus_DegenerateFit = 7,
  SlowfastStatus_AllTrialsFailed = 8,
  SlowfastStatus_InternalError = 9,
} SlowfastStatus;

// Opaque invariant-graph handle.
typedef struct SlowfastManifold SlowfastManifold;

// Opaque model handle.
typedef struct SlowfastModel SlowfastModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap` bytes). Returns the full message length in bytes,
// excluding the terminator.
//
// # Safety
// `buf` must be writable for `cap` bytes (or null to query the length).
size_t slowfast_last_error(char *buf, size_t cap);

// Build the double-well model (fast drift `x - x^3`).
struct SlowfastModel *slowfast_model_duffing(double epsilon, double noise_d);

// Build the broken-symmetry model (fast drift `2x + x^2 - x^3`).
struct SlowfastModel *slowfast_model_asymmetric(double epsilon, double noise_d);

// Build a custom model. The fast drift is given by `n_coeffs` exact
// rational coefficients (ascending powers, numerator/denominator pairs);
// the equilibria by `n_equilibria` rational positions with stability flags
// (nonzero = sink, zero = saddle). Writes the handle to `out`.
//
// # Safety
// The array pointers must address the stated number of elements.
enum SlowfastStatus slowfast_model_custom(const int64_t *coeff_num,
                                          const int64_t *coeff_den,
                                          size_t n_coeffs,
                                          const int64_t *eq_num,
                                          const int64_t *eq_den,
                                          const uint8_t *eq_is_sink,
                                          size_t n_equilibria,
                                          double epsilon,
                                          double noise_d,
                                          struct SlowfastModel **out);

// Destroy a model handle.
//
// # Safety
// `model` must be a handle from this library, not yet freed.
void slowfast_model_free(struct SlowfastModel *model);

// Solve the invariant-graph series to the given grade cap.
//
// # Safety
// `model` must be a live model handle; `out` must be writable.
enum SlowfastStatus slowfast_manifold_solve(const struct SlowfastModel *model,
                                            uint32_t grade_cap,
                                            struct SlowfastManifold **out);

// Destroy a manifold handle.
//
// # Safety
// `manifold` must be a handle from this library, not yet freed.
void slowfast_manifold_free(struct SlowfastManifold *manifold);

// Render the `y = h(x, l1, e)` series; free with [`slowfast_string_free`].
//
// # Safety
// `manifold` must be a live manifold handle.
char *slowfast_manifold_h_string(const struct SlowfastManifold *manifold);

// Render the `l2 = k(x, l1, e)` series; free with [`slowfast_string_free`].
//
// # Safety
// `manifold` must be a live manifold handle.
char *slowfast_manifold_k_string(const struct SlowfastManifold *manifold);

// Free a string returned by this library.
//
// # Safety
// `s` must come from this library, not yet freed.
void slowfast_string_free(char *s);

// Exact singular action between the adjacent equilibria nearest to
// `from_x` (a sink) and `to_x` (a saddle).
//
// # Safety
// `model` must be a live model handle; `out` must be writable.
enum SlowfastStatus slowfast_singular_action(const struct SlowfastModel *model,
                                             double from_x,
                                             double to_x,
                                             double *out);

// Escape action along the reduced heteroclinic connection at timescale
// ratio `epsilon` (launch offset `delta`), between the default pair.
// Writes the action, the closest-approach miss and the max |H| diagnostic.
//
// # Safety
// Handles must be live; out-pointers writable (may be null to skip).
enum SlowfastStatus slowfast_reduced_action(const struct SlowfastModel *model,
                                            const struct SlowfastManifold *manifold,
                                            double epsilon,
                                            double delta,
                                            double *out_action,
                                            double *out_miss,
                                            double *out_h_drift);

// Escape action along the full 4-D connection (series-free; valid at any
// `epsilon` in (0, 0.5]).
//
// # Safety
// `model` must be a live handle; out-pointers writable (may be null).
enum SlowfastStatus slowfast_full_action(const struct SlowfastModel *model,
                                         double epsilon,
                                         double *out_action,
                                         double *out_miss,
                                         double *out_h_drift);

// Fit the `e^2` coefficient of the action series over a grid of timescale
// ratios (each in (0, 0.2], at least 4 points).
//
// # Safety
// Handles must be live; `eps_grid` must address `n_eps` doubles.
enum SlowfastStatus slowfast_eps2_coefficient(const struct SlowfastModel *model,
                                              const struct SlowfastManifold *manifold,
                                              const double *eps_grid,
                                              size_t n_eps,
                                              double delta,
                                              double *out);

// Base-10 slope of `log T_S` versus `1/D` implied by an action.
double slowfast_predict_cs(double action);

// Run an escape-time ensemble with the drift-implicit scheme between the
// default sink-saddle pair, using the model's `epsilon` and `D`. Trials
// derive independent RNG streams from `(master_seed, trial)`, so results
// are reproducible for any parallelism.
//
// # Safety
// `model` must be a live handle; out-pointers writable (may be null).
enum SlowfastStatus slowfast_mfpt(const struct SlowfastModel *model,
                                  uint64_t n_trials,
                                  uint64_t master_seed,
                                  double nu,
                                  double t_max,
                                  double *out_mean,
                                  double *out_std,
                                  uint64_t *out_timeouts);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOWFAST_H */
