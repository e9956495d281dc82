/* C interface to the hydrovalue reservoir pricing library. */

#ifndef HYDROVALUE_H
#define HYDROVALUE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum HvStatus {
  HV_STATUS_OK = 0,
  HV_STATUS_VALIDATION_ERROR = 1,
  HV_STATUS_SOLVER_ERROR = 2,
  HV_STATUS_CHECK_FAILED = 3,
  HV_STATUS_NULL_ARGUMENT = 4,
  HV_STATUS_NOT_SOLVED = 5,
  HV_STATUS_UNSUPPORTED = 6,
  HV_STATUS_PANIC = 7,
} HvStatus;

/**
 * Opaque pipeline handle.
 */
typedef struct HvPipeline HvPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *hv_version(void);

/**
 * Copies the last error message into `buf` (truncating) and returns the
 * full message length in bytes, excluding the terminator.
 */
uintptr_t hv_last_error_message(char *buf, uintptr_t cap);

/**
 * Creates a pipeline from a TOML config file; NULL path uses the default
 * reference configuration. Returns NULL on error.
 */
struct HvPipeline *hv_pipeline_new(const char *config_path);

/**
 * Frees a pipeline handle.
 */
void hv_pipeline_free(struct HvPipeline *p);

/**
 * Fits the inflow model (quantiles, regime chain, histograms).
 */
enum HvStatus hv_pipeline_fit(struct HvPipeline *p);

/**
 * Builds the MDP and solves the primal/dual LP pair.
 */
enum HvStatus hv_pipeline_solve(struct HvPipeline *p);

/**
 * Model dimensions after solve: states, actions, LP variables, LP rows.
 */
enum HvStatus hv_pipeline_dimensions(struct HvPipeline *p,
                                     uintptr_t *n_states,
                                     uintptr_t *n_actions,
                                     uintptr_t *lp_variables,
                                     uintptr_t *lp_rows);

/**
 * Expected system cost per week and annualized, plus the relative duality gap.
 */
enum HvStatus hv_pipeline_gain(struct HvPipeline *p,
                               double *u_weekly,
                               double *u_annual,
                               double *duality_gap_rel);

/**
 * Policy release in MW at (week 1..52, regime 1..|R|, level 0..capacity).
 * Returns `Unsupported` when the state is off the optimal support.
 */
enum HvStatus hv_pipeline_release_mw(struct HvPipeline *p,
                                     uint32_t week,
                                     uintptr_t regime,
                                     uintptr_t level,
                                     double *release_mw);

/**
 * Anchored state value v(s) in dollars.
 */
enum HvStatus hv_pipeline_value(struct HvPipeline *p,
                                uint32_t week,
                                uintptr_t regime,
                                uintptr_t level,
                                double *value);

/**
 * Marginal water value in $/MWh between `level` and `level`+1.
 */
enum HvStatus hv_pipeline_marginal_value(struct HvPipeline *p,
                                         uint32_t week,
                                         uintptr_t regime,
                                         uintptr_t level,
                                         double *dollars_per_mwh);

/**
 * Simulates the solved policy; reports the mean weekly cost and its
 * standard error. Returns `CheckFailed` when the simulated mean is more
 * than three standard errors from the LP gain.
 */
enum HvStatus hv_pipeline_simulate(struct HvPipeline *p,
                                   uint32_t years,
                                   uint64_t seed,
                                   double *mean_weekly_cost,
                                   double *std_error_weekly);

/**
 * Writes policy.csv, values.csv, and offer_curves.csv into `dir`.
 */
enum HvStatus hv_pipeline_export_csv(struct HvPipeline *p, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDROVALUE_H */
