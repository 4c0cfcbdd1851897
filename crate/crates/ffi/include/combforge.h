/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef COMBFORGE_H
#define COMBFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_UTF8 = 2,
  CF_STATUS_FORMAT = 3,
  CF_STATUS_VALIDATION = 4,
  CF_STATUS_SOLVER = 5,
  CF_STATUS_CAP_EXCEEDED = 6,
  CF_STATUS_PANIC = 7,
} CfStatus;

// Verdict of [`cf_is_compatible`].
typedef enum CfVerdict {
  CF_VERDICT_INCOMPATIBLE = 0,
  CF_VERDICT_COMPATIBLE = 1,
  CF_VERDICT_UNDECIDED = 2,
} CfVerdict;

// Opaque tester collection.
typedef struct CfCollection CfCollection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cf_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *cf_last_error_message(void);

// Parses a collection from JSON (`{"testers": [{"slots": n, "effects": [...]}]}`).
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` writable.
enum CfStatus cf_collection_from_json(const char *json, struct CfCollection **out);

// Probe-trivial (`input_dim = 1`) or maximally mixed probe qubit testers in
// mutually unbiased bases.
//
// # Safety
// `out` must be writable.
enum CfStatus cf_collection_qubit_mub(size_t testers, size_t input_dim, struct CfCollection **out);

// Random testers with a shared probe and projective final measurements.
//
// # Safety
// `out` must be writable.
enum CfStatus cf_collection_random(size_t slots,
                                   bool probe_trivial,
                                   size_t testers,
                                   size_t outcomes,
                                   uint64_t seed,
                                   struct CfCollection **out);

// Releases a collection. Null is ignored.
//
// # Safety
// `handle` must come from this library and not be used afterwards.
void cf_collection_free(struct CfCollection *handle);

// Number of testers and outcomes per tester.
//
// # Safety
// `handle` must be a live collection; the out pointers must be writable.
enum CfStatus cf_collection_shape(const struct CfCollection *handle,
                                  size_t *testers,
                                  size_t *outcomes);

// Serializes a collection to JSON.
//
// # Safety
// `handle` must be a live collection and `out` writable.
enum CfStatus cf_collection_to_json(const struct CfCollection *handle, char **out);

// Robustness of incompatibility.
//
// # Safety
// `handle` must be a live collection and `value` writable.
enum CfStatus cf_robustness(const struct CfCollection *handle, double *value);

// Convex weight of incompatibility.
//
// # Safety
// `handle` must be a live collection and `value` writable.
enum CfStatus cf_convex_weight(const struct CfCollection *handle, double *value);

// Compatibility verdict.
//
// # Safety
// `handle` must be a live collection and `verdict` writable.
enum CfStatus cf_is_compatible(const struct CfCollection *handle, enum CfVerdict *verdict);

// Full robustness certificate as JSON.
//
// # Safety
// `handle` must be a live collection and `out` writable.
enum CfStatus cf_robustness_json(const struct CfCollection *handle, char **out);

// Verifies the discrimination (`theorem = 1`) or exclusion (`theorem = 2`)
// advantage and returns the report as JSON.
//
// # Safety
// `handle` must be a live collection and `out` writable.
enum CfStatus cf_verify_theorem_json(const struct CfCollection *handle,
                                     uint32_t theorem,
                                     size_t random_ensembles,
                                     uint64_t seed,
                                     char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void cf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMBFORGE_H */
