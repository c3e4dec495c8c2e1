#ifndef CHEMLAB_H
#define CHEMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChemlabField {
  CHEMLAB_FIELD_U = 0,
  CHEMLAB_FIELD_V = 1,
  CHEMLAB_FIELD_W = 2,
  /**
   * Cell centres.
   */
  CHEMLAB_FIELD_R = 3,
} ChemlabField;

typedef enum ChemlabFunction {
  CHEMLAB_FUNCTION_D = 0,
  CHEMLAB_FUNCTION_S = 1,
  CHEMLAB_FUNCTION_F = 2,
  CHEMLAB_FUNCTION_G = 3,
  CHEMLAB_FUNCTION_H = 4,
} ChemlabFunction;

typedef enum ChemlabOutcome {
  CHEMLAB_OUTCOME_COMPLETED = 0,
  CHEMLAB_OUTCOME_BLOWUP_SUSPECTED = 1,
  CHEMLAB_OUTCOME_DT_FLOOR = 2,
  CHEMLAB_OUTCOME_GROWING = 3,
} ChemlabOutcome;

typedef enum ChemlabStatus {
  CHEMLAB_STATUS_OK = 0,
  CHEMLAB_STATUS_NULL_POINTER = 1,
  /**
   * A parameter, configuration key or argument range was rejected.
   */
  CHEMLAB_STATUS_INVALID = 2,
  CHEMLAB_STATUS_RUNTIME = 3,
  /**
   * The run produced a non-finite state; no run handle is returned.
   */
  CHEMLAB_STATUS_DIVERGED = 4,
  CHEMLAB_STATUS_BUFFER_TOO_SMALL = 5,
  CHEMLAB_STATUS_PANIC = 6,
} ChemlabStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct ChemlabConfig ChemlabConfig;

typedef struct ChemlabKinetics ChemlabKinetics;

/**
 * Result of a completed integration.
 */
typedef struct ChemlabRun ChemlabRun;

typedef struct ChemlabSummary {
  int32_t outcome;
  double t_final;
  uint64_t steps;
  uint64_t rejected;
  double min_dt;
  double sup_u_initial;
  double sup_u_final;
  double max_mass_drift;
  double energy_initial;
  double energy_final;
  double max_budget_residual;
} ChemlabSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *chemlab_last_error(void);

/**
 * Static NUL-terminated version string.
 */
const char *chemlab_version(void);

/**
 * Parses a TOML configuration. Relative table paths resolve against the
 * working directory.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum ChemlabStatus chemlab_config_parse(const char *text, struct ChemlabConfig **out);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum ChemlabStatus chemlab_config_load(const char *path, struct ChemlabConfig **out);

/**
 * Writes the 16-hex-digit run id plus NUL into `buf` (at least 17 bytes).
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
enum ChemlabStatus chemlab_config_run_id(const struct ChemlabConfig *cfg, char *buf, size_t len);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void chemlab_config_free(struct ChemlabConfig *cfg);

/**
 * Initial energy of the configured data.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ChemlabStatus chemlab_initial_energy(const struct ChemlabConfig *cfg, double *out);

/**
 * Integrates the configuration. On `Diverged` no handle is produced.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ChemlabStatus chemlab_simulate(const struct ChemlabConfig *cfg, struct ChemlabRun **out);

/**
 * Writes the run artifacts (timeseries, summary, profiles, plots) to `dir`.
 *
 * # Safety
 * Pointers must be valid; `dir` NUL-terminated.
 */
enum ChemlabStatus chemlab_run_write(const struct ChemlabRun *run,
                                     const struct ChemlabConfig *cfg,
                                     const char *dir);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ChemlabStatus chemlab_run_summary(const struct ChemlabRun *run, struct ChemlabSummary *out);

/**
 * Number of cells; 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or valid.
 */
size_t chemlab_run_cells(const struct ChemlabRun *run);

/**
 * Copies one final profile into `buf`, which must hold `chemlab_run_cells`
 * values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum ChemlabStatus chemlab_run_profile(const struct ChemlabRun *run,
                                       enum ChemlabField field,
                                       double *buf,
                                       size_t len);

/**
 * # Safety
 * `run` must come from this library and not be used afterwards.
 */
void chemlab_run_free(struct ChemlabRun *run);

/**
 * Prototype law `D = K_D (s+1)^-alpha`, `S = k_S (s+1)^(beta-1) s`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ChemlabStatus chemlab_kinetics_prototype(double alpha,
                                              double beta,
                                              double k_diff,
                                              double k_sens,
                                              struct ChemlabKinetics **out);

/**
 * Evaluates `D`, `S`, `f`, `G` or `H` at `s >= 0`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ChemlabStatus chemlab_kinetics_eval(const struct ChemlabKinetics *kin,
                                         enum ChemlabFunction which,
                                         double s,
                                         double *out);

/**
 * # Safety
 * `kin` must come from this library and not be used afterwards.
 */
void chemlab_kinetics_free(struct ChemlabKinetics *kin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMLAB_H */
