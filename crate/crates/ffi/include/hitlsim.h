#ifndef HITLSIM_H
#define HITLSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum HitlStatus {
  HITL_STATUS_OK = 0,
  HITL_STATUS_NULL_POINTER = 1,
  HITL_STATUS_INVALID_UTF8 = 2,
  HITL_STATUS_CONFIG = 3,
  HITL_STATUS_IO = 4,
  HITL_STATUS_PARSE = 5,
  HITL_STATUS_SIMULATION = 6,
  HITL_STATUS_ANALYSIS = 7,
  HITL_STATUS_STATISTICS = 8,
  HITL_STATUS_BUFFER_TOO_SMALL = 9,
  HITL_STATUS_PANIC = 10,
} HitlStatus;

/**
 * Threshold method for [`hitl_spm_anova`].
 */
typedef enum HitlThresholdMode {
  HITL_THRESHOLD_MODE_RFT = 0,
  HITL_THRESHOLD_MODE_PERMUTATION = 1,
} HitlThresholdMode;

/**
 * Opaque recorded trial.
 */
typedef struct HitlRecord HitlRecord;

/**
 * Opaque scenario configuration.
 */
typedef struct HitlScenario HitlScenario;

/**
 * Opaque stepping simulation.
 */
typedef struct HitlSimulation HitlSimulation;

/**
 * Per-trial metrics. Values that do not apply or could not be computed
 * are NaN.
 */
typedef struct HitlTrialMetrics {
  size_t cycles;
  double stride_m;
  double speed_mps;
  double cadence_spm;
  double e_x_cm;
  double e_y_cm;
  /**
   * Inter-cycle SD of hip, knee and ankle angles, degrees.
   */
  double sd_deg[3];
} HitlTrialMetrics;

/**
 * Summary of a two-group SPM ANOVA.
 */
typedef struct HitlSpmSummary {
  double threshold;
  double fwhm;
  double max_f;
  size_t n_clusters;
  /**
   * Smallest cluster p-value, or 1 without clusters.
   */
  double min_p;
} HitlSpmSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if the last
 * call succeeded. Free with [`hitl_string_free`].
 */
char *hitl_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void hitl_string_free(char *s);

/**
 * Scenario with all defaults.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum HitlStatus hitl_scenario_default(struct HitlScenario **out);

/**
 * Parses a scenario from TOML text. Relative file references resolve
 * against the working directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string, `out` valid writable storage.
 */
enum HitlStatus hitl_scenario_from_toml(const char *toml, struct HitlScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` valid writable storage.
 */
enum HitlStatus hitl_scenario_from_file(const char *path, struct HitlScenario **out);

/**
 * # Safety
 * `scenario` must be a live handle.
 */
enum HitlStatus hitl_scenario_set_seed(struct HitlScenario *scenario, uint64_t seed);

/**
 * Resolved scenario as TOML. Free with [`hitl_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle, `out` valid writable storage.
 */
enum HitlStatus hitl_scenario_to_toml(const struct HitlScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle not yet freed.
 */
void hitl_scenario_free(struct HitlScenario *scenario);

/**
 * Creates a simulation at t = 0. The scenario is copied.
 *
 * # Safety
 * `scenario` must be a live handle, `out` valid writable storage.
 */
enum HitlStatus hitl_simulation_new(const struct HitlScenario *scenario,
                                    struct HitlSimulation **out);

/**
 * Advances `steps` physics steps.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum HitlStatus hitl_simulation_step(struct HitlSimulation *sim, uint64_t steps);

/**
 * Simulation time in seconds.
 *
 * # Safety
 * `sim` must be a live handle, `t` valid writable storage.
 */
enum HitlStatus hitl_simulation_time(const struct HitlSimulation *sim, double *t);

/**
 * Pelvis pose `[x, y, z, roll, pitch, yaw]`, world frame.
 *
 * # Safety
 * `sim` must be a live handle, `pose` must point to 6 writable doubles.
 */
enum HitlStatus hitl_simulation_pelvis(const struct HitlSimulation *sim, double *pose);

/**
 * Coupling displacement `[x, y, z, roll, pitch, yaw]` in the attachment frame.
 *
 * # Safety
 * `sim` must be a live handle, `q` must point to 6 writable doubles.
 */
enum HitlStatus hitl_simulation_coupling(const struct HitlSimulation *sim, double *q);

/**
 * # Safety
 * `sim` must be NULL or a handle not yet freed.
 */
void hitl_simulation_free(struct HitlSimulation *sim);

/**
 * Runs one trial to its termination condition.
 *
 * # Safety
 * `scenario` must be a live handle, `label` a NUL-terminated string and
 * `out` valid writable storage.
 */
enum HitlStatus hitl_run_trial(const struct HitlScenario *scenario,
                               const char *label,
                               size_t trial,
                               struct HitlRecord **out);

/**
 * Loads a record CSV and its JSON sidecar.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` valid writable storage.
 */
enum HitlStatus hitl_record_load(const char *path, struct HitlRecord **out);

/**
 * Writes `<label>_trial<k>.csv` and its sidecar into `dir`.
 *
 * # Safety
 * `record` must be a live handle and `dir` a NUL-terminated string.
 */
enum HitlStatus hitl_record_save(const struct HitlRecord *record, const char *dir);

/**
 * Number of recorded samples, 0 for NULL.
 *
 * # Safety
 * `record` must be NULL or a live handle.
 */
size_t hitl_record_len(const struct HitlRecord *record);

/**
 * Copies one named column into `buf`. `len` receives the column length;
 * if it exceeds `cap`, nothing is copied and `BufferTooSmall` is returned.
 *
 * # Safety
 * `record` must be a live handle, `name` a NUL-terminated string, `buf`
 * must hold `cap` doubles (may be NULL when `cap` is 0) and `len` must be
 * valid writable storage.
 */
enum HitlStatus hitl_record_column(const struct HitlRecord *record,
                                   const char *name,
                                   double *buf,
                                   size_t cap,
                                   size_t *len);

/**
 * Gait metrics of one trial, keeping at most `cycles` cycles around the
 * middle of the walk (0 keeps all).
 *
 * # Safety
 * `record` must be a live handle, `out` valid writable storage.
 */
enum HitlStatus hitl_record_analyze(const struct HitlRecord *record,
                                    size_t cycles,
                                    struct HitlTrialMetrics *out);

/**
 * # Safety
 * `record` must be NULL or a handle not yet freed.
 */
void hitl_record_free(struct HitlRecord *record);

/**
 * Two-group SPM ANOVA on row-major curves: `a` holds `n_a` curves and `b`
 * holds `n_b` curves, each of `nodes` values. `seed` and `n_perm` are used
 * by the permutation mode only.
 *
 * # Safety
 * `a` must hold `n_a * nodes` doubles, `b` must hold `n_b * nodes`
 * doubles and `out` must be valid writable storage.
 */
enum HitlStatus hitl_spm_anova(const double *a,
                               size_t n_a,
                               const double *b,
                               size_t n_b,
                               size_t nodes,
                               double alpha,
                               enum HitlThresholdMode mode,
                               size_t n_perm,
                               uint64_t seed,
                               struct HitlSpmSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HITLSIM_H */
