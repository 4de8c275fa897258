#ifndef HYDRO_ENSEMBLE_H
#define HYDRO_ENSEMBLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every exported function.
 */
typedef enum HeStatus {
  HE_STATUS_OK = 0,
  HE_STATUS_NULL_POINTER = 1,
  HE_STATUS_INVALID_ARGUMENT = 2,
  HE_STATUS_CONFIG = 3,
  HE_STATUS_IO = 4,
  HE_STATUS_PARSE = 5,
  HE_STATUS_NUMERICAL = 6,
  HE_STATUS_NOT_FOUND = 7,
  HE_STATUS_PANIC = 99,
} HeStatus;

/**
 * Monthly forcing and streamflow of one catchment.
 */
typedef struct HeCatchment HeCatchment;

/**
 * Experiment configuration (periods, probabilities, chain settings).
 */
typedef struct HeConfig HeConfig;

/**
 * Combined quantile prediction over the testing period, with the
 * matching observations.
 */
typedef struct HePrediction HePrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The
 * pointer stays valid until the next call into the library on this thread.
 */
const char *he_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *he_status_string(enum HeStatus status);

/**
 * Library version as a NUL-terminated string.
 */
const char *he_version(void);

/**
 * Creates a configuration holding the defaults.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum HeStatus he_config_new(struct HeConfig **out);

/**
 * Reads a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum HeStatus he_config_load(const char *path, struct HeConfig **out);

/**
 * Sets one configuration key, e.g. `("m", "100")`.
 *
 * # Safety
 * `config` must come from this library; strings must be NUL-terminated.
 */
enum HeStatus he_config_set(struct HeConfig *config, const char *key, const char *value);

/**
 * Checks the configuration as a whole (cross-key constraints).
 *
 * # Safety
 * `config` must come from this library.
 */
enum HeStatus he_config_validate(const struct HeConfig *config);

/**
 * # Safety
 * `config` must come from this library or be NULL; it must not be used
 * afterwards.
 */
void he_config_free(struct HeConfig *config);

/**
 * Loads a daily catchment CSV and aggregates it to whole years of months.
 * The catchment id is the file stem.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum HeStatus he_catchment_load(const char *path, struct HeCatchment **out);

/**
 * Builds a catchment from monthly arrays of length `n` (mm/month) starting
 * at `start_year`/`start_month`.
 *
 * # Safety
 * `id` must be NUL-terminated, the three arrays must hold `n` values and
 * `out` must be writable.
 */
enum HeStatus he_catchment_from_monthly(const char *id,
                                        int32_t start_year,
                                        uint32_t start_month,
                                        const double *precipitation,
                                        const double *potential_evaporation,
                                        const double *streamflow,
                                        size_t n,
                                        struct HeCatchment **out);

/**
 * Number of months in the catchment record.
 *
 * # Safety
 * `catchment` must come from this library and `out` be writable.
 */
enum HeStatus he_catchment_months(const struct HeCatchment *catchment, size_t *out);

/**
 * # Safety
 * `catchment` must come from this library or be NULL.
 */
void he_catchment_free(struct HeCatchment *catchment);

/**
 * Runs one scheme (`"basic-linear"`, `"basic-quantile"` or `"1"`..`"6"`)
 * on a catchment. Ensemble schemes calibrate the model first, which can
 * take a while.
 *
 * # Safety
 * Handles must come from this library, `scheme` must be NUL-terminated
 * and `out` writable.
 */
enum HeStatus he_run_scheme(const struct HeConfig *config,
                            const struct HeCatchment *catchment,
                            const char *scheme,
                            struct HePrediction **out);

/**
 * Number of testing months in the prediction.
 *
 * # Safety
 * `prediction` must come from this library and `out` be writable.
 */
enum HeStatus he_prediction_months(const struct HePrediction *prediction, size_t *out);

/**
 * Number of predicted quantile levels.
 *
 * # Safety
 * `prediction` must come from this library and `out` be writable.
 */
enum HeStatus he_prediction_levels(const struct HePrediction *prediction, size_t *out);

/**
 * Probability of quantile level `index`.
 *
 * # Safety
 * `prediction` must come from this library and `out` be writable.
 */
enum HeStatus he_prediction_probability(const struct HePrediction *prediction,
                                        size_t index,
                                        double *out);

/**
 * Copies the predicted `p`-quantile series into `buffer`, which must hold
 * exactly as many values as [`he_prediction_months`] reports.
 *
 * # Safety
 * `prediction` must come from this library and `buffer` hold `len` values.
 */
enum HeStatus he_prediction_quantile(const struct HePrediction *prediction,
                                     double p,
                                     double *buffer,
                                     size_t len);

/**
 * Scores the central `1 - alpha` interval against the testing-period
 * observations. Any of the output pointers may be NULL.
 *
 * # Safety
 * `prediction` must come from this library; non-NULL outputs must be
 * writable.
 */
enum HeStatus he_prediction_score(const struct HePrediction *prediction,
                                  double alpha,
                                  double *coverage,
                                  double *width,
                                  double *interval_score);

/**
 * # Safety
 * `prediction` must come from this library or be NULL.
 */
void he_prediction_free(struct HePrediction *prediction);

/**
 * Average interval score of `n` central `1 - alpha` intervals.
 *
 * # Safety
 * The arrays must hold `n` values and `out` be writable.
 */
enum HeStatus he_average_interval_score(const double *lower,
                                        const double *upper,
                                        const double *observed,
                                        size_t n,
                                        double alpha,
                                        double *out);

/**
 * Fraction of observations inside the closed intervals.
 *
 * # Safety
 * The arrays must hold `n` values and `out` be writable.
 */
enum HeStatus he_coverage_probability(const double *lower,
                                      const double *upper,
                                      const double *observed,
                                      size_t n,
                                      double *out);

/**
 * Mean of `upper - lower`.
 *
 * # Safety
 * The arrays must hold `n` values and `out` be writable.
 */
enum HeStatus he_average_width(const double *lower, const double *upper, size_t n, double *out);

/**
 * Runs the monthly model from its default initial state over `n` months
 * of forcing and writes the simulated streamflow into `flow`.
 *
 * # Safety
 * The forcing arrays and `flow` must hold `n` values.
 */
enum HeStatus he_gr2m_simulate(double theta1,
                               double theta2,
                               const double *precipitation,
                               const double *potential_evaporation,
                               size_t n,
                               double *flow);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDRO_ENSEMBLE_H */
