#ifndef LFRG_H
#define LFRG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all entry points.
typedef enum LfrgStatus {
  LFRG_STATUS_OK = 0,
  LFRG_STATUS_NULL_POINTER = 1,
  LFRG_STATUS_INVALID_ARGUMENT = 2,
  // The arguments lie outside the domain of the kernel or system.
  LFRG_STATUS_DOMAIN = 3,
  // A polygamma pole was hit.
  LFRG_STATUS_POLE = 4,
  // Newton iteration did not converge.
  LFRG_STATUS_NO_CONVERGENCE = 5,
  // Adaptive quadrature did not converge.
  LFRG_STATUS_CONVERGENCE = 6,
  LFRG_STATUS_INDEX_OUT_OF_RANGE = 7,
  LFRG_STATUS_PANIC = 8,
} LfrgStatus;

typedef enum LfrgTerminationKind {
  LFRG_TERMINATION_KIND_REACHED_END = 0,
  LFRG_TERMINATION_KIND_DOMAIN_STOP = 1,
  LFRG_TERMINATION_KIND_POLE_STOP = 2,
  LFRG_TERMINATION_KIND_STEP_BUDGET = 3,
} LfrgTerminationKind;

// Sign convention of the de Sitter beta system.
typedef enum LfrgSignMode {
  LFRG_SIGN_MODE_KERNEL_CONSISTENT = 0,
  LFRG_SIGN_MODE_PAPER_TRANSCRIBED = 1,
} LfrgSignMode;

// Opaque beta-system handle.
typedef struct LfrgBetaSystem LfrgBetaSystem;

// Opaque trajectory handle.
typedef struct LfrgTrajectory LfrgTrajectory;

// A fixed point with its linearization; eigenvalues are sorted by
// decreasing real part and exponents are their negatives.
typedef struct LfrgFixedPoint {
  double location[3];
  double residual;
  uint32_t iterations;
  double stability_matrix[9];
  double eigenvalues_re[3];
  double eigenvalues_im[3];
  double exponents_re[3];
  double exponents_im[3];
} LfrgFixedPoint;

// How a flow ended. `index` and `value` are only meaningful for
// `POLE_STOP`; `t` is the last accepted time otherwise.
typedef struct LfrgTermination {
  enum LfrgTerminationKind kind;
  double t;
  uint32_t index;
  double value;
} LfrgTermination;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library from the same thread.
const char *lfrg_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *lfrg_version(void);

// ψ⁽ⁿ⁾(x) for n = 0, 1, 2.
//
// # Safety
// `out` must be null or valid for writing one `double`.
enum LfrgStatus lfrg_polygamma(uint32_t order, double x, double *out);

// Bose part of the thermal Wick square, (1/2π²)∫p²/√(p²+M²)·n_B(p) dp.
//
// # Safety
// `out` must be null or valid for writing one `double`.
enum LfrgStatus lfrg_bose_tadpole(double m2, double beta, double *out);

// Minkowski-vacuum Wick square in even dimension `d`.
//
// # Safety
// `out` must be null or valid for writing one `double`.
enum LfrgStatus lfrg_minkowski_wick_square(double m2, double mu2, uint32_t d, double *out);

// Thermal Wick square at scale `k`; `mu2` ≤ 0 ties μ to k.
//
// # Safety
// `out` must be null or valid for writing one `double`.
enum LfrgStatus lfrg_thermal_wick_square(double m2, double beta, double mu2, double k, double *out);

// Bunch–Davies Wick square; `mu2` ≤ 0 sets μ² = 12H².
//
// # Safety
// `out` must be null or valid for writing one `double`.
enum LfrgStatus lfrg_desitter_wick_square(double m2, double h2, double xi, double mu2, double *out);

// d = 4 Minkowski-vacuum system in dimensionless couplings; `mu2` ≤ 0
// ties μ to k.
//
// # Safety
// `out` must be null or valid for writing one pointer.
enum LfrgStatus lfrg_beta_system_minkowski(double mu2,
                                           double cutoff,
                                           bool kernel_derived,
                                           struct LfrgBetaSystem **out);

// High-temperature system in dimensionless couplings.
//
// # Safety
// `out` must be null or valid for writing one pointer.
enum LfrgStatus lfrg_beta_system_thermal_high_t(struct LfrgBetaSystem **out);

// Full thermal system in dimensionful couplings; `mu2` ≤ 0 ties μ to k.
//
// # Safety
// `out` must be null or valid for writing one pointer.
enum LfrgStatus lfrg_beta_system_thermal(double beta,
                                         double mu2,
                                         double cutoff,
                                         bool kernel_derived,
                                         struct LfrgBetaSystem **out);

// De Sitter system with μ² = 12H². `sign` is an [`LfrgSignMode`] value.
// A non-negative `k2_over_h2` freezes that ratio; a negative one lets
// k = `cutoff`·eᵗ run.
//
// # Safety
// `out` must be null or valid for writing one pointer.
enum LfrgStatus lfrg_beta_system_de_sitter(double h2,
                                           double xi,
                                           uint32_t sign,
                                           double k2_over_h2,
                                           double cutoff,
                                           struct LfrgBetaSystem **out);

// Any beta system from its JSON description, e.g.
// `{"system": "thermal-high-t"}`.
//
// # Safety
// `json` must be null or a NUL-terminated string; `out` must be null or
// valid for writing one pointer.
enum LfrgStatus lfrg_beta_system_from_json(const char *json, struct LfrgBetaSystem **out);

// Releases a beta system. Null is ignored.
//
// # Safety
// `sys` must be null or a handle from this library not yet freed.
void lfrg_beta_system_free(struct LfrgBetaSystem *sys);

// Beta functions at time `t`: reads 3 couplings, writes 3 rates.
//
// # Safety
// `g` and `out` must be null or valid for 3 `double`s.
enum LfrgStatus lfrg_beta_eval(const struct LfrgBetaSystem *sys,
                               double t,
                               const double *g,
                               double *out);

// Damped Newton search from `guess`. `tol` ≤ 0 and `max_iter` = 0 pick the
// defaults (1e−12, 200). On `NO_CONVERGENCE`, `out->location` and
// `out->residual` hold the last iterate.
//
// # Safety
// `guess` must be null or valid for 3 `double`s; `out` null or writable.
enum LfrgStatus lfrg_find_fixed_point(const struct LfrgBetaSystem *sys,
                                      const double *guess,
                                      double tol,
                                      uint32_t max_iter,
                                      struct LfrgFixedPoint *out);

// Stability matrix and exponents at `point`; the residual is reported,
// not enforced.
//
// # Safety
// `point` must be null or valid for 3 `double`s; `out` null or writable.
enum LfrgStatus lfrg_stability_analysis(const struct LfrgBetaSystem *sys,
                                        const double *point,
                                        struct LfrgFixedPoint *out);

// Integrates the flow from `t0` to `t1`. Tolerances ≤ 0 and
// `max_steps` = 0 pick the defaults. Early termination is not an error:
// inspect it with [`lfrg_trajectory_termination`].
//
// # Safety
// `g0` must be null or valid for 3 `double`s; `out` null or writable.
enum LfrgStatus lfrg_integrate(const struct LfrgBetaSystem *sys,
                               const double *g0,
                               double t0,
                               double t1,
                               double rel_tol,
                               double abs_tol,
                               uint64_t max_steps,
                               struct LfrgTrajectory **out);

// Number of samples (initial state plus one per accepted step); 0 for null.
//
// # Safety
// `traj` must be null or a live trajectory handle.
size_t lfrg_trajectory_len(const struct LfrgTrajectory *traj);

// Sample `i`: time, scale k and the three couplings.
//
// # Safety
// `traj` must be null or live; `t`, `k` writable; `state` valid for 3 `double`s.
enum LfrgStatus lfrg_trajectory_sample(const struct LfrgTrajectory *traj,
                                       size_t i,
                                       double *t,
                                       double *k,
                                       double *state);

// # Safety
// `traj` must be null or live; `out` null or writable.
enum LfrgStatus lfrg_trajectory_termination(const struct LfrgTrajectory *traj,
                                            struct LfrgTermination *out);

// Releases a trajectory. Null is ignored.
//
// # Safety
// `traj` must be null or a handle from this library not yet freed.
void lfrg_trajectory_free(struct LfrgTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFRG_H */
