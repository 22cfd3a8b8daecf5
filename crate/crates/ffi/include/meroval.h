#ifndef MEROVAL_H
#define MEROVAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MerovalStatus {
  MEROVAL_STATUS_OK = 0,
  MEROVAL_STATUS_NULL_ARGUMENT = 1,
  MEROVAL_STATUS_INVALID_UTF8 = 2,
  MEROVAL_STATUS_NOT_FOUND = 3,
  MEROVAL_STATUS_CONFLICT = 4,
  MEROVAL_STATUS_INVALID_INPUT = 5,
  MEROVAL_STATUS_CANCELLED = 6,
  MEROVAL_STATUS_IO = 7,
  MEROVAL_STATUS_INTERNAL = 8,
} MerovalStatus;

/**
 * Opaque workspace handle.
 */
typedef struct MerovalWorkspace MerovalWorkspace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next call into the library from the same thread; do not free.
 */
const char *meroval_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void meroval_string_free(char *s);

/**
 * Creates a new workspace directory.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MerovalStatus meroval_workspace_init(const char *path, struct MerovalWorkspace **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MerovalStatus meroval_workspace_open(const char *path, struct MerovalWorkspace **out);

/**
 * # Safety
 * `ws` must be null or a handle from this library, freed once.
 */
void meroval_workspace_free(struct MerovalWorkspace *ws);

/**
 * Loads corpus, ontology and mapping text. `index` may be null.
 *
 * # Safety
 * Pointers must be valid nul-terminated strings.
 */
enum MerovalStatus meroval_workspace_ingest(const struct MerovalWorkspace *ws,
                                            const char *data,
                                            const char *index,
                                            const char *ontology,
                                            const char *mapping);

/**
 * Applies an ontology correction patch.
 *
 * # Safety
 * `ws` must be a live handle; `patch` a nul-terminated string.
 */
enum MerovalStatus meroval_workspace_apply_patch(const struct MerovalWorkspace *ws,
                                                 const char *patch);

/**
 * Evaluates every pair. `prover` is a prover spec as accepted by the CLI
 * or null for the built-in prover. Writes the metric rows as JSON.
 *
 * # Safety
 * `ws` must be a live handle; `out` must be writable.
 */
enum MerovalStatus meroval_workspace_evaluate(const struct MerovalWorkspace *ws,
                                              const char *prover,
                                              uint64_t seconds,
                                              uint32_t jobs,
                                              char **out);

/**
 * Text metric table of the latest evaluation.
 *
 * # Safety
 * `ws` must be a live handle; `out` must be writable.
 */
enum MerovalStatus meroval_workspace_report(const struct MerovalWorkspace *ws, char **out);

/**
 * Replays the journal and writes the state hash.
 *
 * # Safety
 * `ws` must be a live handle; `out` must be writable.
 */
enum MerovalStatus meroval_workspace_verify(const struct MerovalWorkspace *ws, char **out);

/**
 * Runs the built-in prover on a TPTP problem and writes an SZS report.
 *
 * # Safety
 * `problem` must be a nul-terminated string; `out` must be writable.
 */
enum MerovalStatus meroval_prove_tptp(const char *problem, double seconds, char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MEROVAL_H */
