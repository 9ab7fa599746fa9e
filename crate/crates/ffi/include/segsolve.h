#ifndef SEGSOLVE_H
#define SEGSOLVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Integral over the closed ball.
 */
#define SEG_KERNEL_INTEGRAL 0

/**
 * Supremum over the closed ball.
 */
#define SEG_KERNEL_SUP 1

#define SEG_NODE_INTERIOR 0

#define SEG_NODE_COLLAR 1

#define SEG_NODE_OUTSIDE 2

/**
 * Result code of every fallible call.
 */
typedef enum SegStatus {
  SEG_STATUS_OK = 0,
  SEG_STATUS_NULL_POINTER = 1,
  SEG_STATUS_INVALID_ARGUMENT = 2,
  SEG_STATUS_GEOMETRY = 3,
  SEG_STATUS_SEPARATION = 4,
  SEG_STATUS_LINEAR_SOLVE = 5,
  SEG_STATUS_NO_CONVERGENCE = 6,
  SEG_STATUS_RESIDUAL = 7,
  SEG_STATUS_CONFIG = 8,
  SEG_STATUS_IO = 9,
  SEG_STATUS_PANIC = 10,
} SegStatus;

/**
 * Per-species Dirichlet data on the collar of a domain.
 */
typedef struct SegBoundary SegBoundary;

/**
 * Lattice over an open box with its unit collar.
 */
typedef struct SegDomain SegDomain;

/**
 * Converged solution family with its diagnostics.
 */
typedef struct SegSolution SegSolution;

/**
 * Tolerances for the solve calls; obtain defaults from
 * [`seg_solve_options_default`].
 */
typedef struct SegSolveOptions {
  /**
   * Monotone scheme: stop once consecutive iterates differ by less than this.
   */
  double tol_outer;
  /**
   * Damped fixed point: stop once the update falls below this.
   */
  double fixed_point_tol;
  /**
   * Cap on outer iterations for either scheme.
   */
  size_t max_iter;
  /**
   * Bound on the scaled nonlinear residual of the result.
   */
  double residual_tol;
  /**
   * Relaxation weight of the damped fixed point, in (0, 1].
   */
  double damping;
} SegSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length in bytes,
 * excluding the terminator. Returns 0 when the last call succeeded. Pass a
 * null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t seg_last_error_message(char *buf, size_t len);

/**
 * Static, NUL-terminated name of a status code.
 */
const char *seg_status_name(enum SegStatus status);

/**
 * Default tolerances (outer 1e-8, fixed point 1e-10, 20000 iterations,
 * scaled residual 1e-6, damping 0.5).
 */
struct SegSolveOptions seg_solve_options_default(void);

/**
 * Builds the lattice for the open box `(lower, upper)` of dimension `dim`
 * (1 or 2) with spacing `h`.
 *
 * # Safety
 * `lower` and `upper` must point to `dim` doubles; `out` must be writable.
 */
enum SegStatus seg_domain_new(size_t dim,
                              const double *lower,
                              const double *upper,
                              double h,
                              struct SegDomain **out);

/**
 * Releases a domain; null is ignored.
 *
 * # Safety
 * `domain` must be null or a handle from `seg_domain_new` not yet freed.
 */
void seg_domain_free(struct SegDomain *domain);

/**
 * Spatial dimension, or 0 for a null handle.
 *
 * # Safety
 * `domain` must be null or a live domain handle.
 */
size_t seg_domain_dim(const struct SegDomain *domain);

/**
 * Number of lattice nodes (the length of one field buffer), or 0 for a
 * null handle.
 *
 * # Safety
 * `domain` must be null or a live domain handle.
 */
size_t seg_domain_node_count(const struct SegDomain *domain);

/**
 * Writes the coordinates of node `index` to `xy[0..2]` (the second entry is
 * 0 in 1D) and its kind (`SEG_NODE_*`) to `kind` when non-null.
 *
 * # Safety
 * `domain` must be a live handle, `xy` must point to two writable doubles,
 * `kind` must be null or writable.
 */
enum SegStatus seg_domain_node(const struct SegDomain *domain,
                               size_t index,
                               double *xy,
                               uint32_t *kind);

/**
 * Wraps Dirichlet data for `species` species. `values` holds
 * `species * node_count` doubles; only collar entries are read. Data must be
 * finite, nonnegative and pairwise separated by more than the unit radius.
 *
 * # Safety
 * `domain` must be a live handle; `values` must point to the stated number
 * of doubles; `out` must be writable.
 */
enum SegStatus seg_boundary_new(const struct SegDomain *domain,
                                size_t species,
                                const double *values,
                                struct SegBoundary **out);

/**
 * Releases boundary data; null is ignored.
 *
 * # Safety
 * `boundary` must be null or a handle from `seg_boundary_new` not yet freed.
 */
void seg_boundary_free(struct SegBoundary *boundary);

/**
 * Solves the coupled system with the monotone scheme started from the
 * harmonic extension. `opts` may be null for defaults.
 *
 * # Safety
 * Handles must be live and belong to the same domain; `opts` must be null
 * or valid; `out` must be writable.
 */
enum SegStatus seg_solve_monotone(const struct SegDomain *domain,
                                  const struct SegBoundary *boundary,
                                  uint32_t kernel,
                                  double radius,
                                  double eps,
                                  const struct SegSolveOptions *opts,
                                  struct SegSolution **out);

/**
 * Solves the coupled system with the damped fixed-point iteration. `init`
 * holds `species * node_count` doubles (nonnegative, matching the data on
 * the collar) or is null to start from the data with unit interior values.
 *
 * # Safety
 * As for `seg_solve_monotone`; `init` must be null or point to the stated
 * number of doubles.
 */
enum SegStatus seg_solve_fixed_point(const struct SegDomain *domain,
                                     const struct SegBoundary *boundary,
                                     uint32_t kernel,
                                     double radius,
                                     double eps,
                                     const double *init,
                                     const struct SegSolveOptions *opts,
                                     struct SegSolution **out);

/**
 * Releases a solution; null is ignored.
 *
 * # Safety
 * `solution` must be null or a handle from a solve call not yet freed.
 */
void seg_solution_free(struct SegSolution *solution);

/**
 * Number of species, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t seg_solution_species_count(const struct SegSolution *solution);

/**
 * Outer iterations performed, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t seg_solution_iterations(const struct SegSolution *solution);

/**
 * Last outer-iteration gap, or NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double seg_solution_final_gap(const struct SegSolution *solution);

/**
 * Scaled nonlinear residual `h² · max|F| / max φ`, or NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double seg_solution_residual(const struct SegSolution *solution);

/**
 * Interleaving violations found by the monotone audit, or -1 when no audit
 * was run (fixed-point solutions) or the handle is null.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
int64_t seg_solution_audit_violations(const struct SegSolution *solution);

/**
 * Copies species `species` into `buf`, which must hold exactly `len`
 * doubles with `len` equal to the node count of the domain.
 *
 * # Safety
 * `solution` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum SegStatus seg_solution_copy_field(const struct SegSolution *solution,
                                       size_t species,
                                       double *buf,
                                       size_t len);

/**
 * Runs a TOML configuration exactly like the command-line tool and writes
 * its artifacts to `out_dir`. `command` is "solve", "sweep", "parabolic" or
 * "fb1d", or null to use the `command` key of the configuration.
 *
 * # Safety
 * All strings must be null or NUL-terminated; `config` and `out_dir` must
 * not be null.
 */
enum SegStatus seg_run_config(const char *config, const char *command, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEGSOLVE_H */
