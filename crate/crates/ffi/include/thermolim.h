#ifndef THERMOLIM_H
#define THERMOLIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_DOMAIN = 2,
  TL_STATUS_CUTOFF = 3,
  TL_STATUS_CAPACITY = 4,
  TL_STATUS_INTEGRATION = 5,
  TL_STATUS_QUADRATURE = 6,
  TL_STATUS_CONFIG = 7,
  TL_STATUS_FORMAT = 8,
  TL_STATUS_IO = 9,
  TL_STATUS_BUFFER_TOO_SMALL = 10,
  TL_STATUS_PANIC = 11,
} TlStatus;

/**
 * Truncated field state.
 */
typedef struct TlFieldState TlFieldState;

/**
 * Wigner function on a rectangular grid.
 */
typedef struct TlWignerGrid TlWignerGrid;

/**
 * Model constants.
 */
typedef struct TlParams {
  double omega;
  double delta;
  double g;
  uint32_t n_atoms;
} TlParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated, into `buf`
 * and returns the buffer size it needs (message length + 1). Pass a null
 * `buf` to query the size.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t tl_last_error_message(char *buf, size_t len);

/**
 * ⟨n|D[α]|k⟩ with α = re + i·im.
 *
 * # Safety
 * `out_re` and `out_im` must be valid for writes.
 */
enum TlStatus tl_displacement_element(size_t n,
                                      size_t k,
                                      double re,
                                      double im,
                                      double *out_re,
                                      double *out_im);

/**
 * Coherent state |re + i·im⟩ truncated at `ncut`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TlStatus tl_coherent_state_new(double re, double im, size_t ncut, struct TlFieldState **out);

/**
 * Normalized cat |αe^{iφ}⟩ + |αe^{−iφ}⟩ truncated at `ncut`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TlStatus tl_cat_state_new(double alpha, double phi, size_t ncut, struct TlFieldState **out);

/**
 * Leading-order field state of the evolved cat at time `t`.
 *
 * # Safety
 * `params` must point to a valid `TlParams`; `out` must be valid for writes.
 */
enum TlStatus tl_evolve_cat_leading(const struct TlParams *params,
                                    double alpha,
                                    double phi,
                                    double t,
                                    size_t ncut,
                                    struct TlFieldState **out);

/**
 * Exactly evolves cat ⊗ χ to time `t` and returns the (unnormalized) field
 * component left in χ.
 *
 * # Safety
 * `params` must point to a valid `TlParams`; `out` must be valid for writes.
 */
enum TlStatus tl_evolve_cat_exact(const struct TlParams *params,
                                  double alpha,
                                  double phi,
                                  double t,
                                  size_t ncut,
                                  struct TlFieldState **out);

/**
 * Number of Fock amplitudes (ncut + 1), or 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t tl_field_state_dim(const struct TlFieldState *state);

/**
 * Copies the amplitudes into `re` and `im`, each of length `len` ≥ dim.
 *
 * # Safety
 * `state` must be a live handle; `re` and `im` must be valid for `len`
 * writes.
 */
enum TlStatus tl_field_state_amplitudes(const struct TlFieldState *state,
                                        double *re,
                                        double *im,
                                        size_t len);

/**
 * ‖ψ‖
 *
 * # Safety
 * `state` must be a live handle; `out` must be valid for writes.
 */
enum TlStatus tl_field_state_norm(const struct TlFieldState *state, double *out);

/**
 * |⟨a|b⟩|² / (‖a‖²‖b‖²)
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be valid for writes.
 */
enum TlStatus tl_fidelity(const struct TlFieldState *a, const struct TlFieldState *b, double *out);

/**
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void tl_field_state_free(struct TlFieldState *state);

/**
 * Wigner function of a normalized state on an `nx` × `np` grid.
 *
 * # Safety
 * `state` must be a live handle; `out` must be valid for writes.
 */
enum TlStatus tl_wigner_grid_new(const struct TlFieldState *state,
                                 double x_min,
                                 double x_max,
                                 double p_min,
                                 double p_max,
                                 size_t nx,
                                 size_t np,
                                 struct TlWignerGrid **out);

/**
 * Number of grid values (nx·np), or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t tl_wigner_grid_len(const struct TlWignerGrid *grid);

/**
 * Copies the values, row-major in x, into `buf` of length `len`.
 *
 * # Safety
 * `grid` must be a live handle; `buf` must be valid for `len` writes.
 */
enum TlStatus tl_wigner_grid_values(const struct TlWignerGrid *grid, double *buf, size_t len);

/**
 * Writes the grid in the binary grid format.
 *
 * # Safety
 * `grid` must be a live handle; `path` must be a NUL-terminated string.
 */
enum TlStatus tl_wigner_grid_write_binary(const struct TlWignerGrid *grid, const char *path);

/**
 * # Safety
 * `grid` must be null or a handle not yet freed.
 */
void tl_wigner_grid_free(struct TlWignerGrid *grid);

/**
 * Runs the scenario or sweep described by the TOML file at `config_path`,
 * writing into `out_dir` (may be null to skip files). `converged` receives
 * 1 when no convergence flag was raised.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `converged` must be valid for
 * writes.
 */
enum TlStatus tl_run_config(const char *config_path,
                            const char *out_dir,
                            size_t workers,
                            int32_t *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMOLIM_H */
