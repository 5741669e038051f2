#ifndef CTAR_H
#define CTAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `Ok` is zero; every library error has its own code.
typedef enum CtarStatus {
  CTAR_STATUS_OK = 0,
  CTAR_STATUS_NULL_POINTER = 1,
  CTAR_STATUS_INVALID_INPUT = 2,
  CTAR_STATUS_OUTSIDE_LAPLACE_DOMAIN = 3,
  CTAR_STATUS_MOMENT_NOT_FINITE = 4,
  CTAR_STATUS_GRID_OVERFLOW = 5,
  CTAR_STATUS_AXIS_ZERO = 6,
  CTAR_STATUS_SCAN_INCONCLUSIVE = 7,
  CTAR_STATUS_CAUSALITY_VIOLATED = 8,
  CTAR_STATUS_FREQUENCY_WINDOW_TOO_SMALL = 9,
  CTAR_STATUS_CONTRACTION_VIOLATED = 10,
  CTAR_STATUS_DENOMINATOR_VANISHES = 11,
  CTAR_STATUS_INCREMENT_CONTRACTION = 12,
  CTAR_STATUS_USE_STATIONARY_ROUTE = 13,
  CTAR_STATUS_NOT_INTEGRABLE = 14,
  CTAR_STATUS_KERNEL_HORIZON_TOO_SHORT = 15,
  CTAR_STATUS_INSUFFICIENT_HISTORY = 16,
  CTAR_STATUS_NOT_ASYMPTOTIC = 17,
  CTAR_STATUS_LAG_TOO_LARGE = 18,
  CTAR_STATUS_REPEATED_ROOTS = 19,
  CTAR_STATUS_IO = 20,
  CTAR_STATUS_CONFIG = 21,
  CTAR_STATUS_BUFFER_TOO_SMALL = 22,
  CTAR_STATUS_PANIC = 99,
} CtarStatus;

// Function sampled on `t_i = (start + i) dt`, optionally with an atom at 0.
typedef struct CtarKernel CtarKernel;

// Finite signed measure on `[0, ∞)`: atoms, gamma terms and an optional
// grid density.
typedef struct CtarMeasure CtarMeasure;

// Parameters of the zero-free strip scan.
typedef struct CtarScanConfig {
  double zero_tol;
  size_t points;
  double a_cap;
  double b_cap;
  uint32_t max_depth;
  size_t max_evaluations;
} CtarScanConfig;

// Certified strip `a < Re z ≤ b`, inversion offset `c` and scan extent.
typedef struct CtarStripReport {
  double min_abs_h_on_axis;
  double argmin_y;
  double a;
  double b;
  double c;
  bool causal;
  double scan_y_max;
  size_t scan_points;
  double scan_x_max;
  double scan_lipschitz;
  size_t scan_evaluations;
} CtarStripReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *ctar_last_error(void);

// Library version as a static NUL-terminated string.
const char *ctar_version(void);

// Creates the zero measure.
//
// # Safety
// `out` must be valid for writes.
enum CtarStatus ctar_measure_new(struct CtarMeasure **out);

// Releases a measure; null is ignored.
//
// # Safety
// `m` must be null or a handle from this library not freed before.
void ctar_measure_free(struct CtarMeasure *m);

// Adds `weight · δ_location`.
//
// # Safety
// `m` must be a valid measure handle.
enum CtarStatus ctar_measure_add_atom(struct CtarMeasure *m, double location, double weight);

// Adds the density `c u^{shape-1} e^{-rate u} / Γ(shape)`.
//
// # Safety
// `m` must be a valid measure handle.
enum CtarStatus ctar_measure_add_gamma(struct CtarMeasure *m, double c, double shape, double rate);

// Sets the grid density sampled at `start + k dt`, replacing any previous one.
//
// # Safety
// `m` must be a valid measure handle; `values` valid for `len` reads.
enum CtarStatus ctar_measure_set_grid(struct CtarMeasure *m,
                                      double dt,
                                      double start,
                                      const double *values,
                                      size_t len);

// Delay measure of the CARMA(2,1) fixture with parameters `(a1, a2, b0)`.
//
// # Safety
// `out` must be valid for writes.
enum CtarStatus ctar_measure_carma(double a1, double a2, double b0, struct CtarMeasure **out);

// `α1 δ_0 + α2 · Gamma(β, γ)` delay measure.
//
// # Safety
// `out` must be valid for writes.
enum CtarStatus ctar_measure_gamma_delay(double alpha1,
                                         double alpha2,
                                         double beta,
                                         double gamma_rate,
                                         struct CtarMeasure **out);

// # Safety
// `m` must be a valid measure handle and `out` valid for writes.
enum CtarStatus ctar_measure_total_mass(const struct CtarMeasure *m, double *out);

// # Safety
// `m` must be a valid measure handle and `out` valid for writes.
enum CtarStatus ctar_measure_total_variation(const struct CtarMeasure *m, double *out);

// `∫ u^n μ(du)`, or `∫ u^n |μ|(du)` when `absolute` is true.
//
// # Safety
// `m` must be a valid measure handle and `out` valid for writes.
enum CtarStatus ctar_measure_moment(const struct CtarMeasure *m,
                                    uint32_t n,
                                    bool absolute,
                                    double *out);

// `L[μ](z) = ∫ e^{z u} μ(du)` at `z = re + i·im`.
//
// # Safety
// `m` must be a valid measure handle; outputs valid for writes.
enum CtarStatus ctar_measure_laplace(const struct CtarMeasure *m,
                                     double re,
                                     double im,
                                     double *out_re,
                                     double *out_im);

// `h(z) = -z - L[η](z)` at `z = re + i·im`.
//
// # Safety
// `m` must be a valid measure handle; outputs valid for writes.
enum CtarStatus ctar_h_eval(const struct CtarMeasure *m,
                            double re,
                            double im,
                            double *out_re,
                            double *out_im);

struct CtarScanConfig ctar_scan_config_default(void);

// Scans `h` for a zero-free strip. `config` may be null for defaults.
//
// # Safety
// `m` must be a valid measure handle, `config` null or valid, `out` valid for writes.
enum CtarStatus ctar_find_strip(const struct CtarMeasure *m,
                                const struct CtarScanConfig *config,
                                struct CtarStripReport *out);

// Kernel from `len` samples starting at grid index `start`.
//
// # Safety
// `values` valid for `len` reads; `out` valid for writes.
enum CtarStatus ctar_kernel_new(double dt,
                                int64_t start,
                                const double *values,
                                size_t len,
                                struct CtarKernel **out);

// `𝟙_{[a, b)}` on `[0, len·dt)`.
//
// # Safety
// `out` must be valid for writes.
enum CtarStatus ctar_kernel_indicator(double a,
                                      double b,
                                      double dt,
                                      size_t len,
                                      struct CtarKernel **out);

// Releases a kernel; null is ignored.
//
// # Safety
// `k` must be null or a handle from this library not freed before.
void ctar_kernel_free(struct CtarKernel *k);

// Number of samples; 0 for a null handle.
//
// # Safety
// `k` must be null or a valid kernel handle.
size_t ctar_kernel_len(const struct CtarKernel *k);

// Grid step; NaN for a null handle.
//
// # Safety
// `k` must be null or a valid kernel handle.
double ctar_kernel_dt(const struct CtarKernel *k);

// Grid index of the first sample; 0 for a null handle.
//
// # Safety
// `k` must be null or a valid kernel handle.
int64_t ctar_kernel_start(const struct CtarKernel *k);

// Weight of the atom at 0 carried by measure-valued kernels.
//
// # Safety
// `k` must be null or a valid kernel handle.
double ctar_kernel_atom_at_zero(const struct CtarKernel *k);

// Copies the samples into `buf`, which must hold `ctar_kernel_len(k)` values.
//
// # Safety
// `k` must be a valid kernel handle; `buf` valid for `capacity` writes.
enum CtarStatus ctar_kernel_values(const struct CtarKernel *k, double *buf, size_t capacity);

// Linear interpolation of the samples at time `t`, zero outside the window.
//
// # Safety
// `k` must be a valid kernel handle and `out` valid for writes.
enum CtarStatus ctar_kernel_value_at(const struct CtarKernel *k, double t, double *out);

// Solves for `x0` (Laplace transform `1/h`) on `n` samples of step `dt`.
//
// # Safety
// `m` and `strip` must be valid; `out` valid for writes.
enum CtarStatus ctar_solve_x0(const struct CtarMeasure *m,
                              const struct CtarStripReport *strip,
                              size_t n,
                              double dt,
                              struct CtarKernel **out);

// Grid residual of `x0 = 𝟙_{[0,∞)} + x0 ∗ η ∗ 𝟙`.
//
// # Safety
// Handles must be valid; `out` valid for writes.
enum CtarStatus ctar_resolvent_residual(const struct CtarKernel *x0,
                                        const struct CtarMeasure *m,
                                        double *out);

// Total mass of `x0(du)`; equals -1 for stationary kernels.
//
// # Safety
// Handles must be valid; `out` valid for writes.
enum CtarStatus ctar_mass_identity(const struct CtarKernel *x0,
                                   const struct CtarMeasure *m,
                                   double *out);

// Level kernel `ψ = Σ θ ∗ φ^{∗n}`; requires `|φ|` total variation below 1.
//
// # Safety
// Handles must be valid; `out` valid for writes.
enum CtarStatus ctar_level_kernel_series(const struct CtarKernel *theta,
                                         const struct CtarMeasure *phi,
                                         double tol,
                                         struct CtarKernel **out);

// Level kernel from `L[θ] / (1 - L[φ])` on the line `Re z = c ≤ 0`.
//
// # Safety
// Handles must be valid; `out` valid for writes.
enum CtarStatus ctar_level_kernel_transform(const struct CtarKernel *theta,
                                            const struct CtarMeasure *phi,
                                            double c,
                                            struct CtarKernel **out);

// Grid residual of `ψ = θ + ψ ∗ φ`.
//
// # Safety
// Handles must be valid; `out` valid for writes.
enum CtarStatus ctar_level_residual(const struct CtarKernel *psi,
                                    const struct CtarKernel *theta,
                                    const struct CtarMeasure *phi,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTAR_H */
