#ifndef SPDE2D_H
#define SPDE2D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum Spde2dStatus {
  SPDE2D_STATUS_OK = 0,
  SPDE2D_STATUS_NULL_POINTER = 1,
  SPDE2D_STATUS_INVALID_PARAMETER = 2,
  SPDE2D_STATUS_CONFIG = 3,
  SPDE2D_STATUS_MISALIGNED_THINNING = 4,
  SPDE2D_STATUS_DIMENSION_MISMATCH = 5,
  SPDE2D_STATUS_QUADRATURE = 6,
  SPDE2D_STATUS_CUTOFF_TOO_SMALL = 7,
  SPDE2D_STATUS_DEGENERATE = 8,
  SPDE2D_STATUS_IO = 9,
  SPDE2D_STATUS_FORMAT = 10,
  SPDE2D_STATUS_PANIC = 11,
} Spde2dStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct Spde2dConfig Spde2dConfig;

/**
 * Opaque simulated or loaded field.
 */
typedef struct Spde2dField Spde2dField;

typedef struct Spde2dCoeffEstimate {
  double kappa_hat;
  double eta_hat;
  double theta2_hat;
  double theta1_hat;
  double eta1_hat;
  double contrast;
  bool bound_hit;
  bool budget_exhausted;
} Spde2dCoeffEstimate;

typedef struct Spde2dReactionEstimate {
  double lambda_hat;
  /**
   * NaN in the known-`mu0` variant.
   */
  double mu_hat;
  double theta0_hat;
  /**
   * NaN in the known-`mu0` variant.
   */
  double mu0_hat;
  double lambda_sd;
  double mu_sd;
  bool bound_hit;
} Spde2dReactionEstimate;

typedef struct Spde2dOuFit {
  double lambda_hat;
  double mu_hat;
  double contrast;
  bool bound_hit;
} Spde2dOuFit;

/**
 * Means, sample sds and counts in the order theta1, eta1, theta2, theta0, mu0.
 */
typedef struct Spde2dSummary {
  double mean[5];
  double sd[5];
  size_t count[5];
  size_t replications;
  size_t failed;
  size_t flagged;
} Spde2dSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t spde2d_last_error(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *spde2d_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum Spde2dStatus spde2d_phi(double r, double alpha, double theta2, double *out_value);

/**
 * # Safety
 * `text` must be a NUL-terminated string and `out_config` valid for writes.
 */
enum Spde2dStatus spde2d_config_from_text(const char *text, struct Spde2dConfig **out_config);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_config` valid for writes.
 */
enum Spde2dStatus spde2d_config_from_file(const char *path, struct Spde2dConfig **out_config);

/**
 * # Safety
 * `config` must be null or come from a `spde2d_config_*` constructor.
 */
void spde2d_config_free(struct Spde2dConfig *config);

/**
 * Simulates one field with the config's seed replaced by `seed`.
 *
 * # Safety
 * `config` must be a live handle and `out_field` valid for writes.
 */
enum Spde2dStatus spde2d_field_simulate(const struct Spde2dConfig *config,
                                        uint64_t seed,
                                        struct Spde2dField **out_field);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out_field` valid for writes.
 */
enum Spde2dStatus spde2d_field_load(const char *path, struct Spde2dField **out_field);

/**
 * # Safety
 * `field` must be a live handle and `path` a NUL-terminated string.
 */
enum Spde2dStatus spde2d_field_save(const struct Spde2dField *field, const char *path);

/**
 * Writes `N`, `M1`, `M2`; the data holds `(N+1)(M1+1)(M2+1)` values.
 *
 * # Safety
 * `field` must be a live handle; the outputs must be valid for writes.
 */
enum Spde2dStatus spde2d_field_dims(const struct Spde2dField *field,
                                    size_t *n,
                                    size_t *m1,
                                    size_t *m2);

/**
 * Borrowed pointer to the values in `[t][y][z]` row-major order, valid
 * until the field is freed. Null for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
const double *spde2d_field_data(const struct Spde2dField *field);

/**
 * # Safety
 * `field` must be null or come from a `spde2d_field_*` constructor.
 */
void spde2d_field_free(struct Spde2dField *field);

/**
 * # Safety
 * Handles must be live; `out_estimate` valid for writes.
 */
enum Spde2dStatus spde2d_fit_coeff(const struct Spde2dConfig *config,
                                   const struct Spde2dField *field,
                                   struct Spde2dCoeffEstimate *out_estimate);

/**
 * Coefficient fit followed by the reaction fit on the configured mode.
 *
 * # Safety
 * Handles must be live; `out_estimate` valid for writes.
 */
enum Spde2dStatus spde2d_fit_reaction(const struct Spde2dConfig *config,
                                      const struct Spde2dField *field,
                                      struct Spde2dReactionEstimate *out_estimate);

/**
 * Fits an OU path sampled at step `h`. Pass NaN as `mu_known` to estimate `mu`.
 *
 * # Safety
 * `values` must be valid for `len` reads; `out_fit` valid for writes.
 */
enum Spde2dStatus spde2d_fit_ou(const double *values,
                                size_t len,
                                double epsilon,
                                double alpha,
                                double h,
                                double mu_known,
                                struct Spde2dOuFit *out_fit);

/**
 * Runs the configured replications on `threads` workers. CSV artifacts are
 * written when `out_dir` is not null.
 *
 * # Safety
 * `config` must be live, `out_dir` null or NUL-terminated, `out_summary`
 * valid for writes.
 */
enum Spde2dStatus spde2d_run_mc(const struct Spde2dConfig *config,
                                size_t threads,
                                const char *out_dir,
                                struct Spde2dSummary *out_summary);

/**
 * Value of one condition entry by name, e.g. `"C3.1"` or `"B2"`.
 *
 * # Safety
 * `config` must be live, `name` NUL-terminated, `out_value` valid for writes.
 */
enum Spde2dStatus spde2d_condition_value(const struct Spde2dConfig *config,
                                         const char *name,
                                         double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPDE2D_H */
