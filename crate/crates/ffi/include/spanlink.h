/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SPANLINK_H
#define SPANLINK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  // A required pointer argument was null.
  SL_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SL_STATUS_INVALID_UTF8 = 2,
  // Invalid configuration or argument value.
  SL_STATUS_CONFIG = 3,
  // Malformed or inconsistent input data, or an I/O failure.
  SL_STATUS_DATA = 4,
  // Non-finite values during computation.
  SL_STATUS_NUMERIC = 5,
  // The requested concept id is not in the dictionary.
  SL_STATUS_NOT_FOUND = 6,
  // A panic was caught at the boundary.
  SL_STATUS_INTERNAL = 7,
} SlStatus;

// A dictionary matcher: TF-IDF synonym index over a concept inventory.
typedef struct SlMatcher SlMatcher;

// A trained span model bound to the matcher it was trained with.
typedef struct SlModel SlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if the last call
// succeeded. The pointer stays valid until the next call on this thread.
const char *sl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sl_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void sl_string_free(char *s);

// Builds a matcher from MEDIC TSV text with the default n-gram settings.
//
// # Safety
// `medic_tsv` must be a NUL-terminated string; `out` must be writable.
enum SlStatus sl_matcher_from_medic_text(const char *medic_tsv, struct SlMatcher **out);

// Loads a matcher from a dictionary file written by `spanlink build-dict`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SlStatus sl_matcher_load(const char *path, struct SlMatcher **out);

// # Safety
// `m` must be null or a live handle from this library.
void sl_matcher_free(struct SlMatcher *m);

// Number of concepts in the matcher's inventory, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
size_t sl_matcher_concept_count(const struct SlMatcher *m);

// Dictionary similarity between `text` and the best synonym of `cui`.
//
// # Safety
// `m` must be a live handle; strings NUL-terminated; `out_score` writable.
enum SlStatus sl_matcher_dict_score(const struct SlMatcher *m,
                                    const char *text,
                                    const char *cui,
                                    double *out_score);

// The `k` best concepts for `text` as a JSON array of
// `{"cui": ..., "score": ...}`, best first. Zero-similarity concepts are
// never listed.
//
// # Safety
// `m` must be a live handle; `text` NUL-terminated; `out_json` writable.
enum SlStatus sl_matcher_top_k(const struct SlMatcher *m,
                               const char *text,
                               size_t k,
                               char **out_json);

// Loads a baseline-encoder checkpoint together with the dictionary file it
// was trained with.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum SlStatus sl_model_load(const char *checkpoint_path,
                            const char *dictionary_path,
                            struct SlModel **out);

// # Safety
// `m` must be null or a live handle from this library.
void sl_model_free(struct SlModel *m);

// Recognizes and normalizes disease mentions in one document. The result is
// a JSON array of `{"start", "end", "text", "cui", "score", "context",
// "dict"}` with character offsets into `title + " " + abstract`.
//
// # Safety
// `m` must be a live handle; strings NUL-terminated (`abstract_text` may be
// empty); `out_json` writable.
enum SlStatus sl_model_predict(const struct SlModel *m,
                               const char *title,
                               const char *abstract_text,
                               char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPANLINK_H */
