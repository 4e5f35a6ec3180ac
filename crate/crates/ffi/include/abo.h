#ifndef ABO_H
#define ABO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AboStatus {
  ABO_STATUS_OK = 0,
  ABO_STATUS_NULL_POINTER = 1,
  ABO_STATUS_INVALID_ARGUMENT = 2,
  ABO_STATUS_DIMENSION_MISMATCH = 3,
  ABO_STATUS_NUMERICAL = 4,
  ABO_STATUS_PANIC = 5,
} AboStatus;

/**
 * Acquisition function selector.
 */
typedef enum AboAcquisition {
  /**
   * Predictive mean.
   */
  ABO_ACQUISITION_U1 = 0,
  /**
   * Predictive mean plus `kappa` predictive standard deviations.
   */
  ABO_ACQUISITION_U2 = 1,
} AboAcquisition;

/**
 * Opaque similarity score.
 */
typedef struct AboSimilarity AboSimilarity;

/**
 * Opaque influence surrogate fitted to a data set.
 */
typedef struct AboSurrogate AboSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into the library on this thread.
 */
const char *abo_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *abo_version(void);

/**
 * RBF score `exp(-|x - x'|^2 / (2 lengthscale^2))` with observation noise variance `noise`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AboStatus abo_similarity_rbf_new(double lengthscale, double noise, struct AboSimilarity **out);

/**
 * Symmetric-KL score between diagonal Gaussians; points are `[mean; variances]`
 * with `half_dim` means.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AboStatus abo_similarity_sym_kl_new(double constant,
                                         size_t half_dim,
                                         double sigma_min,
                                         double noise,
                                         struct AboSimilarity **out);

/**
 * Symmetric-KL score with the constant chosen so the score is non-negative
 * on the box `[lower, upper]` of dimension `dim`.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` doubles; `out` must be writable.
 */
enum AboStatus abo_similarity_sym_kl_for_box(const double *lower,
                                             const double *upper,
                                             size_t dim,
                                             double sigma_min,
                                             double noise,
                                             struct AboSimilarity **out);

/**
 * # Safety
 * `sim` must be null or a handle from `abo_similarity_*_new` not yet freed.
 */
void abo_similarity_free(struct AboSimilarity *sim);

/**
 * `S(x, x2)`.
 *
 * # Safety
 * `x` and `x2` must point to `dim` doubles and `out` to one writable double.
 */
enum AboStatus abo_similarity_eval(const struct AboSimilarity *sim,
                                   const double *x,
                                   const double *x2,
                                   size_t dim,
                                   double *out);

/**
 * Gradient of `S(x, x2)` with respect to `x`, written to `grad` (`dim` doubles).
 *
 * # Safety
 * `x`, `x2` must point to `dim` doubles and `grad` to `dim` writable doubles.
 */
enum AboStatus abo_similarity_grad(const struct AboSimilarity *sim,
                                   const double *x,
                                   const double *x2,
                                   size_t dim,
                                   double *grad);

/**
 * Fits a surrogate to `n` points (row-major, `n * dim` doubles) and their
 * values. The similarity handle is copied and may be freed afterwards.
 *
 * # Safety
 * `points` must point to `n * dim` doubles, `values` to `n` doubles and
 * `out` to writable storage for one handle.
 */
enum AboStatus abo_surrogate_new(const struct AboSimilarity *sim,
                                 const double *points,
                                 const double *values,
                                 size_t n,
                                 size_t dim,
                                 double rank_tol,
                                 struct AboSurrogate **out);

/**
 * # Safety
 * `s` must be null or a handle from `abo_surrogate_new` not yet freed.
 */
void abo_surrogate_free(struct AboSurrogate *s);

/**
 * Number of data points and the numerical rank of the regularised Gram matrix.
 *
 * # Safety
 * `n_out` and `rank_out` must be writable.
 */
enum AboStatus abo_surrogate_size(const struct AboSurrogate *s, size_t *n_out, size_t *rank_out);

/**
 * Predictive mean and variance at `x`.
 *
 * # Safety
 * `x` must point to `dim` doubles; `mean` and `variance` to one writable double each.
 */
enum AboStatus abo_surrogate_predict(const struct AboSurrogate *s,
                                     const double *x,
                                     size_t dim,
                                     double *mean,
                                     double *variance);

/**
 * Influence coefficients of `x` (`n` doubles) and the least-squares residual norm.
 *
 * # Safety
 * `x` must point to `dim` doubles, `coefficients` to `n` writable doubles
 * (`n` as reported by `abo_surrogate_size`) and `residual` to one.
 */
enum AboStatus abo_surrogate_influence(const struct AboSurrogate *s,
                                       const double *x,
                                       size_t dim,
                                       double *coefficients,
                                       double *residual);

/**
 * Acquisition value at `x`, and its gradient if `grad` is non-null.
 *
 * # Safety
 * `x` must point to `dim` doubles, `value` to one writable double and
 * `grad` to null or `dim` writable doubles.
 */
enum AboStatus abo_surrogate_acquisition(const struct AboSurrogate *s,
                                         enum AboAcquisition kind,
                                         double kappa,
                                         double variance_floor,
                                         const double *x,
                                         size_t dim,
                                         double *value,
                                         double *grad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABO_H */
