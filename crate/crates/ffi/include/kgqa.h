#ifndef KGQA_H
#define KGQA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call. Anything but `Ok` leaves a message in
 * [`kgqa_last_error`].
 */
typedef enum {
  KGQA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KGQA_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  KGQA_STATUS_INVALID_UTF8 = 2,
  /**
   * Reading an input file failed.
   */
  KGQA_STATUS_IO = 3,
  /**
   * An input could not be parsed (TSV row, query text, or JSON).
   */
  KGQA_STATUS_PARSE = 4,
  /**
   * A well-formed request failed to evaluate.
   */
  KGQA_STATUS_EVAL = 5,
  /**
   * The library panicked; the handle may be in an unusable state.
   */
  KGQA_STATUS_INTERNAL = 6,
} KgqaStatus;

/**
 * An immutable, loaded knowledge graph.
 */
typedef struct KgqaKg KgqaKg;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static string; never freed.
 */
const char *kgqa_version(void);

/**
 * The message of the last failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the thread.
 */
const char *kgqa_last_error(void);

/**
 * Loads a knowledge graph from a triples TSV and optional label TSVs.
 *
 * # Safety
 * `triples_path` must be a valid NUL-terminated string; `label_paths`
 * must point to `n_label_paths` such strings (it may be null when the
 * count is zero); `out` must be a valid destination pointer.
 */
KgqaStatus kgqa_kg_load(const char *triples_path,
                        const char *const *label_paths,
                        size_t n_label_paths,
                        KgqaKg **out);

/**
 * Releases a graph returned by [`kgqa_kg_load`]. Null is a no-op.
 *
 * # Safety
 * `kg` must be null or a pointer from [`kgqa_kg_load`] not freed before.
 */
void kgqa_kg_free(KgqaKg *kg);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `text` must be null or a string pointer this library handed out.
 */
void kgqa_string_free(char *text);

/**
 * # Safety
 * `kg` must be null or a live graph pointer.
 */
uint64_t kgqa_kg_num_entities(const KgqaKg *kg);

/**
 * # Safety
 * `kg` must be null or a live graph pointer.
 */
uint64_t kgqa_kg_num_relations(const KgqaKg *kg);

/**
 * # Safety
 * `kg` must be null or a live graph pointer.
 */
uint64_t kgqa_kg_num_triples(const KgqaKg *kg);

/**
 * Sets `out` to whether the exact directed triple is in the graph.
 *
 * # Safety
 * `kg` must be a live graph pointer, the strings valid and
 * NUL-terminated, and `out` a valid destination pointer.
 */
KgqaStatus kgqa_kg_contains_triple(const KgqaKg *kg,
                                   const char *head,
                                   const char *relation,
                                   const char *tail,
                                   bool *out);

/**
 * Returns the label of `id` through `out`, or `id` itself when the
 * graph has no label for it.
 *
 * # Safety
 * `kg` must be a live graph pointer, `id` a valid NUL-terminated
 * string, and `out` a valid destination pointer.
 */
KgqaStatus kgqa_kg_label(const KgqaKg *kg, const char *id, char **out);

/**
 * Evaluates a SELECT query and returns the sorted answer ids as a JSON
 * array of strings through `out_json`.
 *
 * # Safety
 * `kg` must be a live graph pointer, `query` a valid NUL-terminated
 * string, and `out_json` a valid destination pointer.
 */
KgqaStatus kgqa_kg_select(const KgqaKg *kg, const char *query, char **out_json);

/**
 * Evaluates the CONSTRUCT form of a query and returns the matched
 * triples as a JSON array of `[head, relation, tail]` arrays.
 *
 * # Safety
 * `kg` must be a live graph pointer, `query` a valid NUL-terminated
 * string, and `out_json` a valid destination pointer.
 */
KgqaStatus kgqa_kg_construct(const KgqaKg *kg, const char *query, char **out_json);

/**
 * Classifies an answer tree given as JSON
 * `{"triples": [[h,r,t],...], "seeds": [...], "answer": "..."}` and
 * returns `{"isomorphism": "...", "n_hops": N}` through `out_json`.
 *
 * # Safety
 * `tree_json` must be a valid NUL-terminated string and `out_json` a
 * valid destination pointer.
 */
KgqaStatus kgqa_classify_tree(const char *tree_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGQA_H */
