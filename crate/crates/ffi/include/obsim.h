#ifndef OBSIM_H
#define OBSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ObsStatus {
  OBS_STATUS_OK = 0,
  OBS_STATUS_NULL_ARGUMENT = 1,
  OBS_STATUS_INVALID_UTF8 = 2,
  OBS_STATUS_SYNTAX = 3,
  OBS_STATUS_VALIDATION = 4,
  OBS_STATUS_IO = 5,
  OBS_STATUS_RUNTIME = 6,
  OBS_STATUS_PANIC = 7,
} ObsStatus;

/**
 * The result of one simulation run.
 */
typedef struct ObsReport ObsReport;

/**
 * A parsed and validated scenario.
 */
typedef struct ObsScenario ObsScenario;

/**
 * Packet counters of a report.
 */
typedef struct ObsCounts {
  uint64_t generated;
  uint64_t delivered;
  uint64_t lost;
  uint64_t queued;
  uint64_t in_flight;
  uint64_t bursts;
  uint64_t total_byte_hops;
} ObsCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *obs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *obs_version(void);

/**
 * Parses scenario text in the TOML scenario format.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObsStatus obs_scenario_parse(const char *text, struct ObsScenario **out);

/**
 * Reads and parses a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObsStatus obs_scenario_load(const char *path, struct ObsScenario **out);

/**
 * The built-in default scenario.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ObsStatus obs_scenario_default(struct ObsScenario **out);

/**
 * Replaces the traffic seed, and the routing seed when genetic routing
 * is selected.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
enum ObsStatus obs_scenario_set_seed(struct ObsScenario *scenario, uint64_t seed);

/**
 * Serializes the scenario back to TOML. Free with [`obs_string_free`].
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
char *obs_scenario_to_toml(const struct ObsScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void obs_scenario_free(struct ObsScenario *scenario);

/**
 * Runs the simulation. When `trace` is true the per-event trace is kept
 * and can be read with [`obs_report_trace_csv`].
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum ObsStatus obs_run(const struct ObsScenario *scenario, bool trace, struct ObsReport **out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum ObsStatus obs_report_counts(const struct ObsReport *report, struct ObsCounts *out);

/**
 * Lost over generated packets; NaN for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double obs_report_loss_rate(const struct ObsReport *report);

/**
 * The full metrics report as JSON. Free with [`obs_string_free`].
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *obs_report_json(const struct ObsReport *report);

/**
 * The event trace as CSV (header only when tracing was off). Free with
 * [`obs_string_free`].
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *obs_report_trace_csv(const struct ObsReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void obs_report_free(struct ObsReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void obs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBSIM_H */
