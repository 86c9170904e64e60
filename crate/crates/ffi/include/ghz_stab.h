#ifndef GHZ_STAB_H
#define GHZ_STAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GhzStatus {
  GHZ_STATUS_OK = 0,
  GHZ_STATUS_NULL_POINTER = 1,
  /**
   * Bad configuration, parameter or argument.
   */
  GHZ_STATUS_INVALID_INPUT = 2,
  /**
   * The integrator or a decomposition failed.
   */
  GHZ_STATUS_NUMERICAL = 3,
  GHZ_STATUS_IO = 4,
  /**
   * A buffer is too small; the needed length was written where documented.
   */
  GHZ_STATUS_BUFFER_TOO_SMALL = 5,
  GHZ_STATUS_PANIC = 6,
} GhzStatus;

/**
 * Series selectable with [`ghz_ensemble_series`].
 */
typedef enum GhzSeries {
  GHZ_SERIES_TIME = 0,
  GHZ_SERIES_MEAN_V = 1,
  GHZ_SERIES_MEAN_BURES = 2,
  GHZ_SERIES_MEAN_FIDELITY = 3,
  GHZ_SERIES_REFERENCE = 4,
} GhzSeries;

/**
 * The outcome of an ensemble run.
 */
typedef struct GhzEnsemble GhzEnsemble;

/**
 * A scenario configuration with any overrides applied.
 */
typedef struct GhzScenario GhzScenario;

/**
 * Decay rates for the scenario's target; absent values are NaN.
 */
typedef struct GhzRates {
  double c_bar_z;
  double c_bar_x;
  double c_bar;
  double c_bar_plus;
  double c_bar_minus;
  double ell;
  double c_plus;
  double c_minus;
} GhzRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Release with
 * [`ghz_string_free`].
 */
char *ghz_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void ghz_string_free(char *s);

/**
 * Loads `scenario_a` or `scenario_b`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum GhzStatus ghz_scenario_builtin(const char *name, struct GhzScenario **out);

/**
 * Parses a scenario from configuration text.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum GhzStatus ghz_scenario_parse(const char *config, struct GhzScenario **out);

/**
 * Sets one configuration key. The scenario is unchanged if the result is invalid.
 *
 * # Safety
 * `scenario` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum GhzStatus ghz_scenario_set(struct GhzScenario *scenario, const char *key, const char *value);

/**
 * # Safety
 * `scenario` must come from this library or be null.
 */
void ghz_scenario_free(struct GhzScenario *scenario);

/**
 * Hilbert-space dimension `2^n`.
 *
 * # Safety
 * `scenario` must be a live handle or null (which yields 0).
 */
uintptr_t ghz_scenario_dim(const struct GhzScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle; `out` writable.
 */
enum GhzStatus ghz_scenario_rates(const struct GhzScenario *scenario, struct GhzRates *out);

/**
 * Lyapunov function `V(ρ)` of the scenario and Bures distance of `ρ` to its
 * target. `ρ` is row-major in the computational basis; `im` may be null.
 *
 * # Safety
 * `re` (and `im` unless null) must hold `dim*dim` values; outputs writable.
 */
enum GhzStatus ghz_state_measures(const struct GhzScenario *scenario,
                                  const double *re,
                                  const double *im,
                                  uintptr_t dim,
                                  double *v_out,
                                  double *bures_out);

/**
 * Runs the scenario's ensemble.
 *
 * # Safety
 * `scenario` must be a live handle; `out` writable.
 */
enum GhzStatus ghz_ensemble_run(const struct GhzScenario *scenario, struct GhzEnsemble **out);

/**
 * # Safety
 * `ensemble` must come from this library or be null.
 */
void ghz_ensemble_free(struct GhzEnsemble *ensemble);

/**
 * # Safety
 * `ensemble` must be a live handle or null (which yields 0).
 */
uintptr_t ghz_ensemble_trajectories(const struct GhzEnsemble *ensemble);

/**
 * Number of sample times.
 *
 * # Safety
 * `ensemble` must be a live handle or null (which yields 0).
 */
uintptr_t ghz_ensemble_samples(const struct GhzEnsemble *ensemble);

/**
 * Copies a series of length [`ghz_ensemble_samples`] into `buf`.
 *
 * # Safety
 * `ensemble` must be a live handle; `buf` must hold `len` values.
 */
enum GhzStatus ghz_ensemble_series(const struct GhzEnsemble *ensemble,
                                   enum GhzSeries series,
                                   double *buf,
                                   uintptr_t len);

/**
 * Final target fidelity of each trajectory, length [`ghz_ensemble_trajectories`].
 *
 * # Safety
 * `ensemble` must be a live handle; `buf` must hold `len` values.
 */
enum GhzStatus ghz_ensemble_final_fidelities(const struct GhzEnsemble *ensemble,
                                             double *buf,
                                             uintptr_t len);

/**
 * Fitted exponent of the mean `V` on `[t0, t1]`; pass `t0 > t1` for the
 * default window (last two thirds).
 *
 * # Safety
 * `ensemble` must be a live handle; `slope` writable.
 */
enum GhzStatus ghz_ensemble_fit_v(const struct GhzEnsemble *ensemble,
                                  double t0,
                                  double t1,
                                  double *slope);

/**
 * Exponent of the reference curve (NaN when the law has none).
 *
 * # Safety
 * `ensemble` must be a live handle or null (which yields NaN).
 */
double ghz_ensemble_reference_exponent(const struct GhzEnsemble *ensemble);

/**
 * Writes the ensemble CSV to `path`.
 *
 * # Safety
 * `ensemble` must be a live handle; `path` a NUL-terminated string.
 */
enum GhzStatus ghz_ensemble_write_csv(const struct GhzEnsemble *ensemble, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GHZ_STAB_H */
