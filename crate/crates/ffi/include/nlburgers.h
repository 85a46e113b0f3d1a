#ifndef NLBURGERS_H
#define NLBURGERS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum NlbStatus {
  NLB_STATUS_OK = 0,
  NLB_STATUS_NULL_POINTER = 1,
  NLB_STATUS_DOMAIN = 2,
  NLB_STATUS_PARAMETER = 3,
  NLB_STATUS_DIMENSION = 4,
  NLB_STATUS_ASSEMBLY = 5,
  NLB_STATUS_EIGEN = 6,
  NLB_STATUS_BLOW_UP = 7,
  NLB_STATUS_CONFIG = 8,
  NLB_STATUS_CHECK = 9,
  NLB_STATUS_IO = 10,
  NLB_STATUS_PANIC = 11,
} NlbStatus;

/**
 * Leading generalized eigenpairs of a form.
 */
typedef struct NlbBasis NlbBasis;

/**
 * Assembled stiffness and mass on a uniform mesh.
 */
typedef struct NlbForm NlbForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *nlb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nlb_version(void);

/**
 * Exterior weight `(2/alpha)[(1+x)^-alpha + (1-x)^-alpha]`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum NlbStatus nlb_rho_weight(double x, double alpha, double *out);

/**
 * Constant value of the standard fractional Laplacian of `(1-x^2)^(alpha/2)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum NlbStatus nlb_getoor_constant(double alpha, double *out);

/**
 * Assembles the form on `n_cells` uniform cells; `*form` receives a handle
 * owned by the caller.
 *
 * # Safety
 * `form` must be valid for one write.
 */
enum NlbStatus nlb_form_assemble(size_t n_cells, double alpha, struct NlbForm **form);

/**
 * Releases a form; null is ignored.
 *
 * # Safety
 * `form` must come from [`nlb_form_assemble`] and not be used afterwards.
 */
void nlb_form_free(struct NlbForm *form);

/**
 * Number of interior degrees of freedom (`n_cells - 1`); 0 for null.
 *
 * # Safety
 * `form` must be null or a live handle.
 */
size_t nlb_form_dofs(const struct NlbForm *form);

/**
 * `out = A u` for interior nodal values `u` (both of length `dofs`).
 *
 * # Safety
 * `u` and `out` must be valid for `len` reads and writes respectively.
 */
enum NlbStatus nlb_form_apply(const struct NlbForm *form, const double *u, double *out, size_t len);

/**
 * Discrete strong image of `u` under the standard-normalized operator.
 *
 * # Safety
 * `u` and `out` must be valid for `len` reads and writes respectively.
 */
enum NlbStatus nlb_form_strong_image(const struct NlbForm *form,
                                     const double *u,
                                     double *out,
                                     size_t len);

/**
 * Computes the `n_modes` smallest eigenpairs of a form.
 *
 * # Safety
 * `form` must be a live handle and `basis` valid for one write.
 */
enum NlbStatus nlb_basis_solve(const struct NlbForm *form, size_t n_modes, struct NlbBasis **basis);

/**
 * Releases a basis; null is ignored.
 *
 * # Safety
 * `basis` must come from [`nlb_basis_solve`] and not be used afterwards.
 */
void nlb_basis_free(struct NlbBasis *basis);

/**
 * Number of modes in a basis; 0 for null.
 *
 * # Safety
 * `basis` must be null or a live handle.
 */
size_t nlb_basis_len(const struct NlbBasis *basis);

/**
 * Copies the eigenvalues, ascending, into `out` (length `len` = number of modes).
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum NlbStatus nlb_basis_eigenvalues(const struct NlbBasis *basis, double *out, size_t len);

/**
 * Copies mode `k` (0-based) as interior nodal values into `out` (length `dofs`).
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum NlbStatus nlb_basis_mode(const struct NlbBasis *basis, size_t k, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLBURGERS_H */
