#ifndef TM_FFI_H
#define TM_FFI_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmStatus {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_ARGUMENT = 1,
  TM_STATUS_INVALID_UTF8 = 2,
  TM_STATUS_PARSE_ERROR = 3,
  TM_STATUS_INVALID_MODEL = 4,
  TM_STATUS_SIMULATION_ERROR = 5,
  TM_STATUS_BAD_INPUT = 6,
  TM_STATUS_RAILCAR_ERROR = 7,
  TM_STATUS_PANIC = 8,
} TmStatus;

/**
 * A parsed model file.
 */
typedef struct TmDocument TmDocument;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call.
 */
const char *tm_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void tm_string_free(char *s);

/**
 * Parses model text into a new document.
 *
 * # Safety
 * `src` must be a NUL-terminated string; `out` must be writable.
 */
enum TmStatus tm_document_parse(const char *src, struct TmDocument **out);

/**
 * # Safety
 * `doc` must come from [`tm_document_parse`] or be null.
 */
void tm_document_free(struct TmDocument *doc);

/**
 * Validates the model; writes the findings, one per line.
 *
 * # Safety
 * Pointers must be valid; `fatal` may be null.
 */
enum TmStatus tm_validate(const struct TmDocument *doc, char **findings, bool *fatal);

/**
 * Simulates a JSON stimulus list and writes the trace JSON. `behavior` may
 * be null when the document declares exactly one.
 *
 * # Safety
 * String arguments must be NUL-terminated; `trace` must be writable.
 */
enum TmStatus tm_simulate(const struct TmDocument *doc,
                          const char *behavior,
                          const char *stimuli_json,
                          uint64_t seed,
                          uint64_t max_ticks,
                          char **trace);

/**
 * Checks a trace; writes the verdict JSON and whether it conforms.
 *
 * # Safety
 * As for [`tm_simulate`]; `conforms` may be null.
 */
enum TmStatus tm_check_trace(const struct TmDocument *doc,
                             const char *behavior,
                             const char *trace_json,
                             char **verdict,
                             bool *conforms);

/**
 * Renders the model as DOT, optionally colored by region.
 *
 * # Safety
 * `doc` must be valid; `dot` must be writable.
 */
enum TmStatus tm_export_dot(const struct TmDocument *doc, bool regions, char **dot);

/**
 * Runs the railcar world with default segments and spots.
 *
 * # Safety
 * `trace` must be writable.
 */
enum TmStatus tm_railcar_run(size_t terminals,
                             size_t cars,
                             uint64_t seed,
                             uint64_t max_ticks,
                             char **trace);

/**
 * Explores the railcar world; writes the report JSON and whether it is safe.
 *
 * # Safety
 * `report` must be writable; `safe` may be null.
 */
enum TmStatus tm_railcar_explore(size_t terminals,
                                 size_t cars,
                                 size_t depth,
                                 char **report,
                                 bool *safe);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TM_FFI_H */
