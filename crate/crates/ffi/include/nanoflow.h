#ifndef NANOFLOW_H
#define NANOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_ARGUMENT = 1,
  NF_STATUS_INVALID_UTF8 = 2,
  NF_STATUS_PARSE_ERROR = 3,
  NF_STATUS_POLICY_ERROR = 4,
  NF_STATUS_RUN_ERROR = 5,
  NF_STATUS_TRACE_ERROR = 6,
  NF_STATUS_INFER_ERROR = 7,
  NF_STATUS_PANIC = 8,
} NfStatus;

typedef enum NfStrategy {
  NF_STRATEGY_TAINT = 0,
  NF_STRATEGY_OBSERVABLE = 1,
  NF_STRATEGY_NSU = 2,
  NF_STRATEGY_PU = 3,
} NfStrategy;

typedef enum NfMode {
  NF_MODE_ENFORCE = 0,
  NF_MODE_MEASURE = 1,
} NfMode;

typedef enum NfOutcome {
  NF_OUTCOME_COMPLETED = 0,
  NF_OUTCOME_STOPPED = 1,
  NF_OUTCOME_BUDGET_EXHAUSTED = 2,
} NfOutcome;

/**
 * Sources and initial bindings.
 */
typedef struct NfPolicy NfPolicy;

/**
 * A parsed program.
 */
typedef struct NfProgram NfProgram;

/**
 * The result of one monitored run.
 */
typedef struct NfRun NfRun;

typedef struct NfCounters {
  uint64_t explicit_flows;
  uint64_t observable_flows;
  uint64_t hidden_flows;
} NfCounters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *nf_last_error(void);

/**
 * Library version, a static string.
 */
const char *nf_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void nf_string_free(char *s);

/**
 * Parses NanoJS source; locations in results name `filename`.
 *
 * # Safety
 * `source` and `filename` must be NUL-terminated strings; `out` must be
 * writable.
 */
enum NfStatus nf_program_parse(const char *source, const char *filename, struct NfProgram **out);

/**
 * # Safety
 * `p` must be null or a handle from [`nf_program_parse`], not yet freed.
 */
void nf_program_free(struct NfProgram *p);

/**
 * Reads a policy, `{"sources":[..],"env":{..}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NfStatus nf_policy_parse(const char *json, struct NfPolicy **out);

/**
 * # Safety
 * `p` must be null or a handle from [`nf_policy_parse`], not yet freed.
 */
void nf_policy_free(struct NfPolicy *p);

/**
 * Runs `program` under `policy`. `test_json` (a test case layered over the
 * policy bindings) and `plan_json` (an upgrade plan) may be null.
 *
 * # Safety
 * Handles must be live; non-null strings NUL-terminated; `out` writable.
 */
enum NfStatus nf_run(const struct NfProgram *program,
                     const struct NfPolicy *policy,
                     const char *test_json,
                     const char *plan_json,
                     enum NfStrategy strategy,
                     enum NfMode mode,
                     struct NfRun **out);

/**
 * # Safety
 * `r` must be null or a handle from [`nf_run`], not yet freed.
 */
void nf_run_free(struct NfRun *r);

/**
 * # Safety
 * `r` must be a live run handle; `out` writable.
 */
enum NfStatus nf_run_outcome(const struct NfRun *r, enum NfOutcome *out);

/**
 * Global micro-flow counters of the run.
 *
 * # Safety
 * `r` must be a live run handle; `out` writable.
 */
enum NfStatus nf_run_counters(const struct NfRun *r, struct NfCounters *out);

/**
 * Flows that reached sinks.
 *
 * # Safety
 * `r` must be a live run handle; `out` writable.
 */
enum NfStatus nf_run_sink_counters(const struct NfRun *r, struct NfCounters *out);

/**
 * The run's iFlow trace as JSON Lines.
 *
 * # Safety
 * `r` must be a live run handle; `out` writable.
 */
enum NfStatus nf_run_trace_jsonl(const struct NfRun *r, char **out);

/**
 * Analysis report (micro-flow counts and classified source-to-sink flows)
 * of a JSON Lines trace, as JSON.
 *
 * # Safety
 * `trace_jsonl` must be a NUL-terminated string; `out` writable.
 */
enum NfStatus nf_analyze_jsonl(const char *trace_jsonl, char **out);

/**
 * Infers upgrade statements from `n_tests` test cases (the policy alone
 * when zero) and returns the plan as JSON.
 *
 * # Safety
 * Handles must be live; `tests` must point to `n_tests` NUL-terminated
 * strings (or be null when `n_tests` is zero); `out` writable.
 */
enum NfStatus nf_infer_upgrades(const struct NfProgram *program,
                                const struct NfPolicy *policy,
                                const char *const *tests,
                                uintptr_t n_tests,
                                char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NANOFLOW_H */
