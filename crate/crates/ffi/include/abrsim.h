#ifndef ABRSIM_H
#define ABRSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `AbrParams::selection`: each switch candidate is taken with probability
 * equal to its score, the previous rate keeps the rest.
 */
#define ABR_SELECTION_GATED 0

/**
 * `AbrParams::selection`: scores normalized over all candidates.
 */
#define ABR_SELECTION_NORMALIZED 1

typedef enum AbrStatus {
  ABR_STATUS_OK = 0,
  ABR_STATUS_NULL_POINTER = 1,
  ABR_STATUS_INVALID_UTF8 = 2,
  ABR_STATUS_CONFIG_PARSE = 3,
  ABR_STATUS_TRACE_PARSE = 4,
  ABR_STATUS_VALIDATION = 5,
  ABR_STATUS_HORIZON = 6,
  ABR_STATUS_UNDEFINED_METRIC = 7,
  ABR_STATUS_INVALID_MEASUREMENT = 8,
  ABR_STATUS_NOT_IN_LADDER = 9,
  ABR_STATUS_STALLED_DOWNLOAD = 10,
  ABR_STATUS_IO = 11,
  ABR_STATUS_OUT_OF_RANGE = 12,
  ABR_STATUS_BUFFER_TOO_SMALL = 13,
  ABR_STATUS_PANIC = 14,
} AbrStatus;

/**
 * One adaptive client driven by an external player.
 */
typedef struct AbrController AbrController;

/**
 * A finished simulation with its metrics.
 */
typedef struct AbrRun AbrRun;

/**
 * A parsed scenario and the directory its trace paths are relative to.
 */
typedef struct AbrScenario AbrScenario;

typedef struct AbrSegment {
  uint32_t client_id;
  uint64_t index;
  double bitrate_kbps;
  double sleep_secs;
  double t_start;
  double t_end;
  double buffer_after_secs;
  double measured_kbps;
  double amended_kbps;
  double probed_kbps;
  bool underflow;
  bool overflow;
} AbrSegment;

typedef struct AbrSummary {
  size_t clients;
  size_t segments;
  double end_time;
  double mean_inefficiency;
  double mean_instability;
  double mean_unfairness;
  uint32_t underflow_events;
  size_t overflow_events;
  double conservation_error;
} AbrSummary;

/**
 * Controller parameters. Fill with `abr_params_default` and edit.
 */
typedef struct AbrParams {
  double q_low;
  double q_high;
  double q_max_buffer;
  double q_ref;
  double alpha;
  double delta_kbps;
  double u0;
  double epsilon;
  uint32_t n_min;
  uint32_t n_max;
  uint32_t n0;
  uint32_t selection;
} AbrParams;

typedef struct AbrUpdate {
  double measured_kbps;
  double amended_kbps;
  double probed_kbps;
} AbrUpdate;

typedef struct AbrDecision {
  double bitrate_kbps;
  double sleep_secs;
} AbrDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * success. Valid until the next call on the same thread.
 */
const char *abr_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *abr_version(void);

/**
 * Parses a scenario from TOML text. `base_dir` resolves relative trace
 * paths and may be NULL for the current directory.
 *
 * # Safety
 * `toml` and `base_dir` must be NUL-terminated strings or NULL, `out` a
 * writable pointer.
 */
enum AbrStatus abr_scenario_from_toml(const char *toml,
                                      const char *base_dir,
                                      struct AbrScenario **out);

/**
 * Loads a bundled scenario by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `out` a writable pointer.
 */
enum AbrStatus abr_scenario_bundled(const char *name, struct AbrScenario **out);

/**
 * # Safety
 * `scenario` must come from `abr_scenario_*` and not be freed.
 */
enum AbrStatus abr_scenario_set_seed(struct AbrScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must come from `abr_scenario_*` or be NULL.
 */
void abr_scenario_free(struct AbrScenario *scenario);

/**
 * Simulates a scenario and computes its metrics.
 *
 * # Safety
 * `scenario` must be a live handle, `out` a writable pointer.
 */
enum AbrStatus abr_run(const struct AbrScenario *scenario,
                       bool strict_formulas,
                       struct AbrRun **out);

/**
 * Completed segments over all clients; 0 for NULL.
 *
 * # Safety
 * `run` must be a live handle or NULL.
 */
size_t abr_run_segment_count(const struct AbrRun *run);

/**
 * # Safety
 * `run` must be a live handle, `out` a writable pointer.
 */
enum AbrStatus abr_run_segment(const struct AbrRun *run, size_t i, struct AbrSegment *out);

/**
 * # Safety
 * `run` must be a live handle, `out` a writable pointer.
 */
enum AbrStatus abr_run_summary(const struct AbrRun *run, struct AbrSummary *out);

/**
 * Writes sessions.csv into `buf` with a trailing NUL. `needed`, if not
 * NULL, receives the required size; call with `buf = NULL, len = 0` to
 * query it.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `len` bytes.
 */
enum AbrStatus abr_run_sessions_csv(const struct AbrRun *run,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

/**
 * Same contract as `abr_run_sessions_csv`, for metrics.csv.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `len` bytes.
 */
enum AbrStatus abr_run_metrics_csv(const struct AbrRun *run, char *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `run` must come from `abr_run` or be NULL.
 */
void abr_run_free(struct AbrRun *run);

/**
 * # Safety
 * `out` must be a writable pointer.
 */
enum AbrStatus abr_params_default(struct AbrParams *out);

/**
 * Creates a controller. `rates` may be NULL with `n_rates = 0` for the
 * default ladder, and `params` NULL for the default parameters.
 *
 * # Safety
 * `rates` must hold `n_rates` values; `params` must be NULL or valid;
 * `out` a writable pointer.
 */
enum AbrStatus abr_controller_new(const double *rates,
                                  size_t n_rates,
                                  double segment_secs,
                                  uint64_t seed,
                                  uint32_t client_id,
                                  const struct AbrParams *params,
                                  struct AbrController **out);

/**
 * Reports a finished download. `buffer_secs` is the player's buffer after
 * the segment was appended. `out` may be NULL.
 *
 * # Safety
 * `controller` must be a live handle; `out` NULL or writable.
 */
enum AbrStatus abr_controller_segment_done(struct AbrController *controller,
                                           double bitrate_kbps,
                                           double t_start,
                                           double t_end,
                                           double buffer_secs,
                                           struct AbrUpdate *out);

/**
 * Chooses the next segment's bitrate and any idle time before requesting
 * it, given the current buffer level.
 *
 * # Safety
 * `controller` must be a live handle, `out` a writable pointer.
 */
enum AbrStatus abr_controller_decide(struct AbrController *controller,
                                     double buffer_secs,
                                     struct AbrDecision *out);

/**
 * # Safety
 * `controller` must come from `abr_controller_new` or be NULL.
 */
void abr_controller_free(struct AbrController *controller);

/**
 * # Safety
 * `values` must hold `n` values, `out` a writable pointer.
 */
enum AbrStatus abr_jain_index(const double *values, size_t n, double *out);

/**
 * # Safety
 * `values` must hold `n` values, `out` a writable pointer.
 */
enum AbrStatus abr_unfairness(const double *values, size_t n, double *out);

/**
 * # Safety
 * `history` must hold `n` values, `out` a writable pointer.
 */
enum AbrStatus abr_instability(const double *history, size_t n, size_t d0, double *out);

/**
 * # Safety
 * `bitrates` must hold `n` values, `out` a writable pointer.
 */
enum AbrStatus abr_inefficiency(const double *bitrates,
                                size_t n,
                                double capacity_kbps,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABRSIM_H */
