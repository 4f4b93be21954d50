#ifndef RACETRACK_FE_H
#define RACETRACK_FE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum RfeStatus {
  RFE_STATUS_OK = 0,
  RFE_STATUS_NULL_POINTER = 1,
  RFE_STATUS_INVALID_ARGUMENT = 2,
  RFE_STATUS_NUMERICAL = 3,
  RFE_STATUS_BUFFER_TOO_SMALL = 4,
  RFE_STATUS_PANIC = 5,
} RfeStatus;

// Parameters, grid and kernel of one model.
typedef struct RfeModel RfeModel;

// Outcome of [`rfe_model_simulate`].
typedef struct RfeSimulation RfeSimulation;

// Model constants; field meanings follow the library's `ModelParams`.
typedef struct RfeParams {
  double mu;
  double sigma;
  double fixed_input;
  double tau;
  double migration_speed;
  double lambda_total;
  double phi_total;
  double rho;
} RfeParams;

typedef struct RfeNumerics {
  double dt;
  double fp_tol;
  uintptr_t fp_max_iter;
  double stat_tol;
  uintptr_t max_steps;
  uint64_t seed;
  double perturb_amplitude;
} RfeNumerics;

typedef struct RfeHomogeneous {
  double lambda_bar;
  double phi_bar;
  double y_bar;
  double w_bar;
  double g_bar;
  double omega_bar;
} RfeHomogeneous;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rfe_version(void);

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library on this thread.
const char *rfe_last_error_message(void);

// # Safety
// `out` must point to writable memory for one `RfeParams`.
enum RfeStatus rfe_params_default(struct RfeParams *out);

// # Safety
// `out` must point to writable memory for one `RfeNumerics`.
enum RfeStatus rfe_numerics_default(struct RfeNumerics *out);

// # Safety
// `params` must point to a valid `RfeParams`; `out` to one writable double.
enum RfeStatus rfe_eigenvalue(const struct RfeParams *params, int64_t k, double *out);

// # Safety
// `out` must point to one writable double.
enum RfeStatus rfe_mode_z(int64_t k, double alpha, double rho, double *out);

// # Safety
// `params` must point to a valid `RfeParams`; `out` to one writable double.
enum RfeStatus rfe_z_star(const struct RfeParams *params, double *out);

// Critical transport cost of mode `k` at elasticity `sigma`; the `sigma`
// field of `params` is ignored.
//
// # Safety
// `params` must point to a valid `RfeParams`; `out` to one writable double.
enum RfeStatus rfe_critical_tau(const struct RfeParams *params,
                                int64_t k,
                                double sigma,
                                double *out);

// # Safety
// `params` must point to a valid `RfeParams`; `out` to one writable struct.
enum RfeStatus rfe_homogeneous_state(const struct RfeParams *params, struct RfeHomogeneous *out);

// # Safety
// `params` must point to a valid `RfeParams`; `out` to one writable double.
enum RfeStatus rfe_contraction_modulus(const struct RfeParams *params,
                                       double lambda1,
                                       double lambda2,
                                       double *out);

// Spikes of `values[0..len]` above `threshold_ratio` times the mean.
//
// # Safety
// `values` must be valid for `len` reads; `out` for one write.
enum RfeStatus rfe_count_spikes(const double *values,
                                uintptr_t len,
                                double threshold_ratio,
                                uintptr_t *out);

// Builds a model on `grid_size` nodes. `numerics` may be null for defaults.
//
// # Safety
// `params` must point to a valid `RfeParams`, `numerics` be null or valid,
// and `out` point to writable storage for one handle.
enum RfeStatus rfe_model_new(const struct RfeParams *params,
                             const struct RfeNumerics *numerics,
                             uintptr_t grid_size,
                             struct RfeModel **out);

// # Safety
// `model` must be null or a handle from [`rfe_model_new`] not yet freed.
void rfe_model_free(struct RfeModel *model);

// # Safety
// `model` must be a live handle; `out` valid for one write.
enum RfeStatus rfe_model_grid_size(const struct RfeModel *model, uintptr_t *out);

// Node angles, `grid_size` values.
//
// # Safety
// `model` must be a live handle; `buf` valid for `cap` writes.
enum RfeStatus rfe_model_theta(const struct RfeModel *model, double *buf, uintptr_t cap);

// Nominal and real wage for the population `lambda[0..len]`; `w_out` and
// `omega_out` each receive `len` values.
//
// # Safety
// `model` must be a live handle; `lambda` valid for `len` reads; the
// output buffers valid for `len` writes each.
enum RfeStatus rfe_model_equilibrium(const struct RfeModel *model,
                                     const double *lambda,
                                     uintptr_t len,
                                     double *w_out,
                                     double *omega_out);

// Integrates to stationarity from `initial[0..len]`, or from the seeded
// perturbed-uniform state when `initial` is null.
//
// # Safety
// `model` must be a live handle; `initial` null or valid for `len` reads;
// `out` valid for one handle write.
enum RfeStatus rfe_model_simulate(const struct RfeModel *model,
                                  const double *initial,
                                  uintptr_t len,
                                  struct RfeSimulation **out);

// # Safety
// `sim` must be null or a handle from [`rfe_model_simulate`] not yet freed.
void rfe_simulation_free(struct RfeSimulation *sim);

// # Safety
// `sim` must be a live handle; every non-null output valid for one write.
enum RfeStatus rfe_simulation_summary(const struct RfeSimulation *sim,
                                      uintptr_t *steps,
                                      bool *converged,
                                      double *mass_drift);

// Final population field.
//
// # Safety
// `sim` must be a live handle; `buf` valid for `cap` writes.
enum RfeStatus rfe_simulation_lambda(const struct RfeSimulation *sim, double *buf, uintptr_t cap);

// Real wage at the final population.
//
// # Safety
// `sim` must be a live handle; `buf` valid for `cap` writes.
enum RfeStatus rfe_simulation_omega(const struct RfeSimulation *sim, double *buf, uintptr_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RACETRACK_FE_H */
