#ifndef PLANSPACE_H
#define PLANSPACE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_ARGUMENT = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_INVALID_JSON = 3,
  /*
   Parsing or grounding failed.
   */
  PS_STATUS_TASK = 4,
  /*
   A property did not parse or resolve.
   */
  PS_STATUS_PROPERTY = 5,
  /*
   The selection has no plan; the MUGS are in the output JSON.
   */
  PS_STATUS_UNSOLVABLE = 6,
  /*
   A study limit was hit.
   */
  PS_STATUS_LIMIT = 7,
  /*
   Any other engine error; see the error code string.
   */
  PS_STATUS_ENGINE = 8,
  PS_STATUS_PANIC = 9,
} PsStatus;

/*
 Minimal unsolvable subsets of a project's soft properties.
 */
typedef struct PsCatalog PsCatalog;

/*
 A grounded task with its plan properties.
 */
typedef struct PsProject PsProject;

/*
 An iterative-planning session.
 */
typedef struct PsSession PsSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static string.
 */
const char *ps_version(void);

/*
 Message of the last failed call on this thread; empty after a success.
 Valid until the next call on this thread.
 */
const char *ps_last_error_message(void);

/*
 Engine error code (e.g. `UNKNOWN_ATOM`) of the last failed call.
 */
const char *ps_last_error_code(void);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void ps_string_free(char *s);

/*
 Grounds `domain`/`problem` (PDDL text) and attaches the properties in
 `properties_json` (a JSON array).

 # Safety
 String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum PsStatus ps_project_new(const char *domain,
                             const char *problem,
                             const char *properties_json,
                             struct PsProject **out);

/*
 # Safety
 `project` must be null or a handle from [`ps_project_new`], freed once.
 */
void ps_project_free(struct PsProject *project);

/*
 Plans for the properties in `hard_ids_json` (JSON array of ids) plus
 the global hard ones. Writes the outcome JSON to `out_json` in both the
 solved and the unsolvable case; the latter returns
 [`PsStatus::Unsolvable`].

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_plan(const struct PsProject *project, const char *hard_ids_json, char **out_json);

/*
 Computes all minimal unsolvable subsets of the project's soft properties.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_mugs_compute(const struct PsProject *project, struct PsCatalog **out);

/*
 Number of subsets in the catalog; 0 for a null handle.

 # Safety
 `catalog` must be null or a live handle.
 */
uintptr_t ps_catalog_len(const struct PsCatalog *catalog);

/*
 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_catalog_to_json(const struct PsCatalog *catalog, char **out_json);

/*
 # Safety
 `catalog` must be null or a handle from [`ps_mugs_compute`], freed once.
 */
void ps_catalog_free(struct PsCatalog *catalog);

/*
 Answers "why not `asked`?" for a plan satisfying `satisfied`; both are
 JSON arrays of ids. `max_size` of 0 means unlimited.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_answer_question(const struct PsCatalog *catalog,
                                 const char *asked_json,
                                 const char *satisfied_json,
                                 uintptr_t max_size,
                                 char **out_json);

/*
 Starts a session on a project. `config_json` may be null for the
 default study configuration.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_session_new(const struct PsProject *project,
                             const char *config_json,
                             struct PsSession **out);

/*
 Submits a selection (JSON array of ids) and writes the iteration JSON.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_session_submit(struct PsSession *session,
                                const char *selected_json,
                                char **out_json);

/*
 Asks why the current plan does not satisfy `asked_json`.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_session_ask(struct PsSession *session, const char *asked_json, char **out_json);

/*
 Writes the study record of the session.

 # Safety
 Pointers must be valid as described in the module docs.
 */
enum PsStatus ps_session_export(const struct PsSession *session, char **out_json);

/*
 # Safety
 `session` must be null or a handle from [`ps_session_new`], freed once.
 */
void ps_session_free(struct PsSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANSPACE_H */
