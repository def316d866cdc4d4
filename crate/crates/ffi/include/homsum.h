#ifndef HOMSUM_H
#define HOMSUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero means success.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_CAPACITY = 3,
  HS_STATUS_IO = 4,
  HS_STATUS_PANIC = 5,
} HsStatus;

/**
 * Opaque kernel handle.
 */
typedef struct HsKernel HsKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *hs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Builds a kernel from `nnz` canonical tuples. `indices` holds `nnz * order`
 * strictly increasing 1-based indices, tuple after tuple.
 *
 * # Safety
 * `indices` and `values` must point to arrays of the stated lengths and
 * `out` must be writable.
 */
enum HsStatus hs_kernel_new(size_t order,
                            size_t dim,
                            const size_t *indices,
                            const double *values,
                            size_t nnz,
                            struct HsKernel **out);

/**
 * Generates a named family kernel (`single_pair`, `constant`,
 * `disjoint_pairs`, `walsh`, `random_sparse`) with variance `sigma2`.
 *
 * # Safety
 * `family` must be a NUL-terminated string and `out` writable.
 */
enum HsStatus hs_kernel_generate(const char *family,
                                 size_t order,
                                 size_t size,
                                 double sigma2,
                                 uint64_t seed,
                                 struct HsKernel **out);

/**
 * Reads a kernel file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum HsStatus hs_kernel_read(const char *path, struct HsKernel **out);

/**
 * Writes a kernel file.
 *
 * # Safety
 * `kernel` must be a live handle and `path` a NUL-terminated string.
 */
enum HsStatus hs_kernel_write(const struct HsKernel *kernel, const char *path);

/**
 * Returns a new handle rescaled so that the variance equals `sigma2`.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_kernel_normalize(const struct HsKernel *kernel,
                                  double sigma2,
                                  struct HsKernel **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `kernel` must be NULL or a handle not yet freed.
 */
void hs_kernel_free(struct HsKernel *kernel);

/**
 * Order d, or 0 for NULL.
 *
 * # Safety
 * `kernel` must be NULL or a live handle.
 */
size_t hs_kernel_order(const struct HsKernel *kernel);

/**
 * Dimension N, or 0 for NULL.
 *
 * # Safety
 * `kernel` must be NULL or a live handle.
 */
size_t hs_kernel_dim(const struct HsKernel *kernel);

/**
 * Number of stored canonical entries, or 0 for NULL.
 *
 * # Safety
 * `kernel` must be NULL or a live handle.
 */
size_t hs_kernel_nnz(const struct HsKernel *kernel);

/**
 * Kernel value at an arbitrary index tuple of length d.
 *
 * # Safety
 * `idx` must point to `len` indices and `out` must be writable.
 */
enum HsStatus hs_kernel_evaluate(const struct HsKernel *kernel,
                                 const size_t *idx,
                                 size_t len,
                                 double *out);

/**
 * Homogeneous sum Q(x) for a point of length N.
 *
 * # Safety
 * `x` must point to `len` doubles and `out` must be writable.
 */
enum HsStatus hs_kernel_evaluate_sum(const struct HsKernel *kernel,
                                     const double *x,
                                     size_t len,
                                     double *out);

/**
 * Squared norm over ordered tuples.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_kernel_squared_norm(const struct HsKernel *kernel, double *out);

/**
 * Variance d!·‖f‖².
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_kernel_variance(const struct HsKernel *kernel, double *out);

/**
 * Norm of the r-th contraction of the kernel with itself.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_contraction_norm(const struct HsKernel *kernel, size_t r, double *out);

/**
 * Norm of the symmetrized r-th contraction.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_symmetrized_contraction_norm(const struct HsKernel *kernel, size_t r, double *out);

/**
 * Chi-square defect ‖c_d·f ⋆̃_{d/2} f − f‖ for even d.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_chi_square_defect(const struct HsKernel *kernel, double *out);

/**
 * Exact E[Q⁴] under Gaussian inputs for a unit-variance kernel.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_gaussian_fourth_moment(const struct HsKernel *kernel, double *out);

/**
 * Fills `values` with the N influences (entry 0 is index 1) and writes the
 * maximum to `max`. Pass NULL and 0 to read only the maximum.
 *
 * # Safety
 * `values` must point to `len` writable doubles (or be NULL with `len` 0)
 * and `max` must be writable.
 */
enum HsStatus hs_influences(const struct HsKernel *kernel, double *values, size_t len, double *max);

/**
 * Normal-approximation term T₁ (exact for small kernels, else an upper bound).
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum HsStatus hs_t1(const struct HsKernel *kernel, double *out);

/**
 * Smooth-function constant C* for budget (a, b, B3) and order d.
 *
 * # Safety
 * `out` must be writable.
 */
enum HsStatus hs_c_star(double a, double b, double b3, size_t order, double *out);

/**
 * Draws `n` samples of Q(X) into `samples` for an i.i.d. input law
 * (`gaussian`, `rademacher`, `uniform`, `shifted_exponential`,
 * `two_point:p`). Output depends only on the seed, not on `workers`.
 *
 * # Safety
 * `law` must be a NUL-terminated string and `samples` must point to `n`
 * writable doubles.
 */
enum HsStatus hs_simulate(const struct HsKernel *kernel,
                          const char *law,
                          size_t n,
                          uint64_t seed,
                          size_t workers,
                          double *samples);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMSUM_H */
