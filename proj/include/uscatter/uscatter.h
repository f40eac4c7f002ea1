#ifndef USCATTER_H
#define USCATTER_H

/* C interface to the uscatter library: linear scattering equations on
 * truncated p-adic lattices. All objects are opaque handles owned by the
 * caller and released with the matching us_*_free function. Every fallible
 * call returns a us_status; on failure us_last_error() describes the cause
 * for the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(USCATTER_BUILDING_LIBRARY)
#    define USCATTER_API __declspec(dllexport)
#  else
#    define USCATTER_API __declspec(dllimport)
#  endif
#else
#  define USCATTER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum us_status {
  US_OK = 0,
  US_ERR_NON_PRIME_P = 10,
  US_ERR_GRID_TOO_LARGE = 11,
  US_ERR_INDEX_OUT_OF_RANGE = 12,
  US_ERR_GRID_MISMATCH = 13,
  US_ERR_INVALID_ARGUMENT = 14,
  US_ERR_NEGATIVE_KERNEL_VALUE = 20,
  US_ERR_DIAGONAL_SINGULARITY = 21,
  US_ERR_INVALID_KERNEL = 22,
  US_ERR_MISSING_ANALYTIC_K = 30,
  US_ERR_NEGATIVE_LOSS = 31,
  US_ERR_NON_RADIAL_KERNEL = 32,
  US_ERR_NON_EVALUABLE = 33,
  US_ERR_STEP_TOO_LARGE = 40,
  US_ERR_TOLERANCE_NOT_REACHED = 41,
  US_ERR_NO_POSITIVE_STEADY_STATE = 50,
  US_ERR_NON_CONVERGENCE = 51,
  US_ERR_DEGENERATE_GRID = 52,
  US_ERR_NON_POSITIVE_N = 60,
  US_ERR_INSUFFICIENT_SAMPLES = 61,
  US_ERR_NON_POSITIVE_VALUE = 62,
  US_ERR_CONFIG_PARSE = 70,
  US_ERR_IO = 71,
  US_ERR_INTERNAL = 99
} us_status;

typedef enum us_k_mode { US_K_COLUMN_SUM = 0, US_K_ANALYTIC = 1 } us_k_mode;

typedef enum us_entropy {
  US_H_LINEAR = 0,
  US_H_ABS = 1,
  US_H_SQUARE = 2,
  US_H_POS_PART_SQ = 3,
  US_H_NEG_PART_SQ = 4,
  US_H_SMOOTHED_SIGN = 5
} us_entropy;

typedef struct us_grid us_grid;
typedef struct us_kernel us_kernel;
typedef struct us_generator us_generator;

/* Message of the last failed call on this thread; "" after a success. */
USCATTER_API const char* us_last_error(void);
USCATTER_API const char* us_status_name(us_status status);
USCATTER_API const char* us_version(void);

/* Grid */
USCATTER_API us_status us_grid_new(int p, int n, int outer_level, int inner_level, us_grid** out);
USCATTER_API void us_grid_free(us_grid* grid);
USCATTER_API size_t us_grid_cell_count(const us_grid* grid);
USCATTER_API double us_grid_cell_measure(const us_grid* grid);
USCATTER_API us_status us_grid_cell_norm(const us_grid* grid, size_t index, double* out);
/* Sum of values[i] * cell measure; values has cell_count entries. */
USCATTER_API us_status us_grid_integrate(const us_grid* grid, const double* values, double* out);

/* Kernels */
USCATTER_API us_status us_kernel_constant(double value, us_kernel** out);
/* K = scale * r^exponent off the diagonal, `diagonal` on it. */
USCATTER_API us_status us_kernel_radial_power(double scale, double exponent, double diagonal, us_kernel** out);
/* K = scale for r <= radius, 0 beyond. */
USCATTER_API us_status us_kernel_radial_indicator(double scale, double radius, us_kernel** out);
/* entries is row-major, entries[target * cells + source]. */
USCATTER_API us_status us_kernel_table(const us_grid* grid, const double* entries, us_kernel** out);
USCATTER_API us_status us_kernel_table_csv(const us_grid* grid, const char* path, us_kernel** out);
USCATTER_API us_status us_kernel_projection(const us_grid* grid, const double* weight, const double* steady,
                                            double scale, us_kernel** out);
USCATTER_API us_status us_kernel_symmetric(const us_grid* grid, const double* table, const double* steady,
                                           us_kernel** out);
USCATTER_API us_status us_kernel_detailed_balance(const us_grid* grid, const double* table, const double* steady,
                                                  us_kernel** out);
USCATTER_API void us_kernel_free(us_kernel* kernel);
/* Dense K(y_j, x_i - y_j) into out[i * cells + j]. */
USCATTER_API us_status us_kernel_matrix(const us_kernel* kernel, const us_grid* grid, double t, double* out);

/* Generators. analytic_k may be NULL in column-sum mode. */
USCATTER_API us_status us_generator_new(const us_kernel* kernel, const us_grid* grid, us_k_mode mode,
                                        const double* analytic_k, us_generator** out);
USCATTER_API us_status us_generator_rescaled(const us_kernel* kernel, const us_grid* grid, int level,
                                             us_generator** out);
USCATTER_API void us_generator_free(us_generator* gen);
USCATTER_API size_t us_generator_size(const us_generator* gen);
USCATTER_API double us_generator_max_loss(const us_generator* gen);
USCATTER_API us_status us_generator_apply(const us_generator* gen, const double* f, double* out);
USCATTER_API us_status us_generator_apply_dual(const us_generator* gen, const double* phi, double* out);

/* Time stepping; f and out may not alias. */
USCATTER_API us_status us_step_rk4(const us_generator* gen, const double* f, double dt, double* out);
USCATTER_API us_status us_expm_apply(const us_generator* gen, const double* f, double t, double tolerance,
                                     double* out);
USCATTER_API us_status us_picard(const us_generator* gen, const double* f, double t, int iterations, double* out);
/* rk4 from 0 to t_end with step dt (<= 0 picks the default); final state in out. */
USCATTER_API us_status us_evolve_rk4(const us_generator* gen, const double* f, double dt, double t_end,
                                     double* out);

/* Steady pair with integral(N) = 1 and integral(phi N) = 1. */
USCATTER_API us_status us_steady_pair(const us_generator* gen, double* steady, double* dual);
USCATTER_API us_status us_alpha(const us_generator* gen, const double* steady, const double* dual, double* alpha);

USCATTER_API us_status us_relative_entropy(const us_generator* gen, const double* dual, const double* steady,
                                           const double* n, us_entropy h, double param, double* out);
USCATTER_API us_status us_gre_dissipation(const us_generator* gen, const double* dual, const double* steady,
                                          const double* n, us_entropy h, double param, double* out);
USCATTER_API us_status us_fit_decay_rate(const double* times, const double* values, size_t count, double* out);

/* Runs a CLI subcommand; returns the process exit code (0, 1 or 2). */
USCATTER_API int us_run_experiment(const char* subcommand, const char* config_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
