#ifndef PCAHARMONY_H
#define PCAHARMONY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum PhStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  PH_STATUS_OK = 0,
  PH_STATUS_NULL_POINTER = 1,
  PH_STATUS_INVALID_ARGUMENT = 2,
  PH_STATUS_DIMENSION_MISMATCH = 3,
  PH_STATUS_NUMERICAL = 4,
  PH_STATUS_DEGENERATE = 5,
  PH_STATUS_IO = 6,
  PH_STATUS_FORMAT = 7,
  PH_STATUS_BUFFER_TOO_SMALL = 8,
  PH_STATUS_INTERNAL = 99,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum PhStatus PhStatus;
#else
typedef int32_t PhStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque fitted PCA model.
 */
typedef struct PhPcaModel PhPcaModel;

typedef struct PhConfusion {
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
} PhConfusion;

typedef struct PhScores {
  double recall;
  double precision;
  double dice;
  /**
   * Nonzero when the ground truth had no foreground.
   */
  int32_t degenerate;
} PhScores;

typedef struct PhTestResult {
  double t;
  double df;
  double p;
} PhTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *ph_last_error_message(void);

/**
 * Fits PCA on a `rows x cols` row-major matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out` to writable storage
 * for one handle.
 */
PhStatus ph_pca_fit(const double *data, size_t rows, size_t cols, struct PhPcaModel **out);

/**
 * Loads a model saved in the UPM1 format.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
PhStatus ph_pca_load(const char *path, struct PhPcaModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
PhStatus ph_pca_save(const struct PhPcaModel *model, const char *path);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void ph_pca_free(struct PhPcaModel *model);

/**
 * Number of stored components, `min(rows - 1, cols)`. Zero for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ph_pca_n_components(const struct PhPcaModel *model);

/**
 * Feature dimension. Zero for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ph_pca_dim(const struct PhPcaModel *model);

/**
 * Number of training samples. Zero for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ph_pca_n_samples(const struct PhPcaModel *model);

/**
 * Copies the eigenvalues (descending) into `out`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
PhStatus ph_pca_eigenvalues(const struct PhPcaModel *model, double *out, size_t len);

/**
 * Writes the rank-`k` reconstruction of the training samples, row-major
 * `n_samples x dim`, unclamped.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
PhStatus ph_pca_reconstruct(const struct PhPcaModel *model, size_t k, double *out, size_t len);

/**
 * Kaiser-Guttman count: eigenvalues strictly above `threshold`, at least 1.
 *
 * # Safety
 * `eigenvalues` must hold `n` doubles.
 */
PhStatus ph_kaiser_guttman(const double *eigenvalues, size_t n, double threshold, size_t *k_out);

/**
 * Fraction of total variance carried by the first `k` eigenvalues.
 *
 * # Safety
 * `eigenvalues` must hold `n` doubles.
 */
PhStatus ph_cumulative_variance(const double *eigenvalues, size_t n, size_t k, double *out);

/**
 * Confusion counts of two binary masks of `len` pixels (values 0 or 1).
 *
 * # Safety
 * `pred` and `gt` must each hold `len` bytes.
 */
PhStatus ph_confusion(const uint8_t *pred, const uint8_t *gt, size_t len, struct PhConfusion *out);

/**
 * Recall, precision and Dice from confusion counts.
 *
 * # Safety
 * Both pointers must be valid.
 */
PhStatus ph_scores(const struct PhConfusion *counts, struct PhScores *out);

/**
 * `beta * soft_dice_loss + (1 - beta) * mean_bce` over `len` pixels.
 *
 * # Safety
 * `prob` must hold `len` doubles and `gt` `len` bytes.
 */
PhStatus ph_combined_loss(const double *prob,
                          const uint8_t *gt,
                          size_t len,
                          double beta,
                          double smooth,
                          double *out);

/**
 * Two-tailed Student-t tail probability `P(|T| >= |t|)`.
 *
 * # Safety
 * `out` must be valid.
 */
PhStatus ph_t_sf(double t, double df, double *out);

/**
 * Paired test on `b - a`.
 *
 * # Safety
 * `a` and `b` must each hold `n` doubles.
 */
PhStatus ph_paired_t_test(const double *a, const double *b, size_t n, struct PhTestResult *out);

/**
 * Welch's unequal-variance test, statistic signed as `mean(b) - mean(a)`.
 *
 * # Safety
 * `a` must hold `na` doubles and `b` `nb` doubles.
 */
PhStatus ph_welch_t_test(const double *a,
                         size_t na,
                         const double *b,
                         size_t nb,
                         struct PhTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCAHARMONY_H */
