#ifndef LPTRACE_H
#define LPTRACE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum LptFormat {
  LPT_FORMAT_TEXT = 0,
  LPT_FORMAT_STRUCTURED = 1,
} LptFormat;

typedef enum LptStatus {
  LPT_STATUS_OK = 0,
  /**
   * The run succeeded and the program has no answer set.
   */
  LPT_STATUS_UNSATISFIABLE = 1,
  LPT_STATUS_NULL_ARGUMENT = 2,
  LPT_STATUS_INVALID_UTF8 = 3,
  /**
   * Lexical, syntax, annotation or safety error, or an unsupported construct.
   */
  LPT_STATUS_PARSE_ERROR = 4,
  LPT_STATUS_TRANSLATION_ERROR = 5,
  /**
   * Arithmetic failure during grounding.
   */
  LPT_STATUS_EVAL_ERROR = 6,
  LPT_STATUS_INVALID_ARGUMENT = 7,
  LPT_STATUS_INTERNAL = 8,
  LPT_STATUS_PANIC = 9,
} LptStatus;

/**
 * Rendered output of one run.
 */
typedef struct LptResult LptResult;

/**
 * Sources and constant overrides waiting to be run.
 */
typedef struct LptSession LptSession;

typedef struct LptOptions {
  /**
   * Number of answer sets to compute; 0 means all.
   */
  uint32_t models;
  bool auto_trace;
  enum LptFormat format;
  /**
   * Explanations kept per atom; 0 means no cap.
   */
  uint32_t max_expls;
  bool show_model;
} LptOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct LptOptions lpt_options_default(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lpt_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library on this thread.
 */
const char *lpt_last_error_message(void);

struct LptSession *lpt_session_new(void);

/**
 * # Safety
 * `session` must be null or a pointer from [`lpt_session_new`] that has
 * not been freed.
 */
void lpt_session_free(struct LptSession *session);

/**
 * Appends a source; sources are concatenated in the order added. `name`
 * is used in diagnostics.
 *
 * # Safety
 * `session` must be a live session; `name` and `text` NUL-terminated
 * strings.
 */
enum LptStatus lpt_session_add_source(struct LptSession *session,
                                      const char *name,
                                      const char *text);

/**
 * Overrides `#const name`, as `-c name=value` does on the command line.
 *
 * # Safety
 * `session` must be a live session; `name` and `value` NUL-terminated
 * strings.
 */
enum LptStatus lpt_session_set_const(struct LptSession *session,
                                     const char *name,
                                     const char *value);

/**
 * Parses, solves and explains the session's program. On `Ok` and
 * `Unsatisfiable`, `*out` receives a result to release with
 * [`lpt_result_free`]; otherwise `*out` is set to null. `options` may be
 * null for the defaults.
 *
 * # Safety
 * `session` must be a live session, `options` null or valid, and `out` a
 * valid pointer.
 */
enum LptStatus lpt_session_run(const struct LptSession *session,
                               const struct LptOptions *options,
                               struct LptResult **out);

/**
 * Rendered output, owned by `result`. Null if `result` is null.
 *
 * # Safety
 * `result` must be null or a live result.
 */
const char *lpt_result_output(const struct LptResult *result);

/**
 * # Safety
 * `result` must be null or a live result.
 */
size_t lpt_result_answer_count(const struct LptResult *result);

/**
 * # Safety
 * `result` must be null or a pointer from [`lpt_session_run`] that has
 * not been freed.
 */
void lpt_result_free(struct LptResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPTRACE_H */
