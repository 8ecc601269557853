#ifndef GERBE_INDEX_H
#define GERBE_INDEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values match the command-line exit codes where they overlap.
 */
typedef enum GiStatus {
  GI_STATUS_OK = 0,
  GI_STATUS_MODULE_ERROR = 1,
  GI_STATUS_INPUT_ERROR = 2,
  GI_STATUS_INTERNAL_ERROR = 3,
  GI_STATUS_NULL_POINTER = 4,
  GI_STATUS_INVALID_UTF8 = 5,
  GI_STATUS_OUT_OF_RANGE = 6,
} GiStatus;

/**
 * Which computation [`gi_run`] performs.
 */
typedef enum GiCommand {
  GI_COMMAND_VALIDATE = 0,
  GI_COMMAND_CHERN = 1,
  GI_COMMAND_INDEX_ANALYTIC = 2,
  GI_COMMAND_INDEX_TOPOLOGICAL = 3,
  GI_COMMAND_VERIFY = 4,
} GiCommand;

/**
 * Opaque report handle.
 */
typedef struct GiReport GiReport;

/**
 * Opaque scenario handle.
 */
typedef struct GiScenario GiScenario;

/**
 * Overrides for a run; zero means "use the scenario's value".
 */
typedef struct GiRunOptions {
  size_t resolution;
  size_t truncation;
  double tolerance;
} GiRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; valid until the next call.
 */
const char *gi_last_error(void);

/**
 * Loads a scenario file, or a bundled fixture by name.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GiStatus gi_scenario_load(const char *path, struct GiScenario **out);

/**
 * Parses scenario text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GiStatus gi_scenario_parse(const char *text, struct GiScenario **out);

/**
 * # Safety
 * `s` must come from `gi_scenario_load` / `gi_scenario_parse` or be null.
 */
void gi_scenario_free(struct GiScenario *s);

/**
 * Order of the Dixmier-Douady class (0 for infinite order) and its description.
 *
 * # Safety
 * `s` must be a live scenario handle; `order` and `summary` valid pointers or null.
 */
enum GiStatus gi_ddclass(const struct GiScenario *s, uint64_t *order, char **summary);

/**
 * Runs a command and returns its report. A report that records failed
 * checks is still returned with status `GI_STATUS_OK`; see [`gi_report_passed`].
 *
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum GiStatus gi_run(const struct GiScenario *s,
                     enum GiCommand command,
                     struct GiRunOptions options,
                     struct GiReport **out);

/**
 * # Safety
 * `r` must be a live report handle or null.
 */
bool gi_report_passed(const struct GiReport *r);

/**
 * # Safety
 * `r` must be a live report handle or null.
 */
size_t gi_report_integral_count(const struct GiReport *r);

/**
 * Value and (optionally) name of integral `i`.
 *
 * # Safety
 * `r` must be a live report handle; `value` and `name` valid pointers or null.
 */
enum GiStatus gi_report_integral(const struct GiReport *r, size_t i, double *value, char **name);

/**
 * Fixed-format text rendering; free with [`gi_string_free`].
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
char *gi_report_text(const struct GiReport *r);

/**
 * JSON rendering; free with [`gi_string_free`].
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
char *gi_report_json(const struct GiReport *r);

/**
 * # Safety
 * `r` must come from [`gi_run`] or be null.
 */
void gi_report_free(struct GiReport *r);

/**
 * # Safety
 * `s` must be a string returned by this library or null.
 */
void gi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GERBE_INDEX_H */
