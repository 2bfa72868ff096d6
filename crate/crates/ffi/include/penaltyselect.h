#ifndef PENALTYSELECT_H
#define PENALTYSELECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Objective family: worst single penalty or summed penalty.
typedef enum PsMetric {
  PS_METRIC_MAX_PENALTY = 0,
  PS_METRIC_TOTAL_PENALTY = 1,
} PsMetric;

// Result code of every exported call; zero means success.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_PARSE = 3,
  PS_STATUS_INVALID_INSTANCE = 4,
  PS_STATUS_INVALID_ARGUMENT = 5,
  PS_STATUS_INFEASIBLE = 6,
  PS_STATUS_TOO_LARGE = 7,
  PS_STATUS_INTERNAL = 8,
} PsStatus;

// Opaque validated instance.
typedef struct PsInstance PsInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses an instance from JSON and validates it.
//
// On success `*out` owns a handle to release with `ps_instance_free`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum PsStatus ps_instance_from_json(const char *json, struct PsInstance **out);

// Releases a handle; null is ignored.
//
// # Safety
// `inst` must come from `ps_instance_from_json` and not be freed twice.
void ps_instance_free(struct PsInstance *inst);

// Number of hypotheses, or 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
uintptr_t ps_instance_hypotheses(const struct PsInstance *inst);

// Number of sources, or 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
uintptr_t ps_instance_sources(const struct PsInstance *inst);

// Validates a JSON instance without keeping it.
//
// `*violations_json` receives a JSON array of `{code, message}` objects,
// empty when the instance is valid.
//
// # Safety
// `json` must be a NUL-terminated string and `violations_json` writable.
enum PsStatus ps_validate_json(const char *json, char **violations_json);

// Lower bound on the submodularity ratio of the max-penalty scores.
//
// # Safety
// `inst` must be a live handle and `out` writable.
enum PsStatus ps_gamma_bound(const struct PsInstance *inst, double *out);

// Minimum-cost selection meeting per-hypothesis penalty bounds.
//
// `brute_force` nonzero requests the exact optimum. The greedy result
// carries a certificate when the source count allows exhaustive checking.
// `*solution_json` receives the solution document.
//
// # Safety
// `inst` must be a live handle, `bounds` must point to `len` doubles and
// `solution_json` must be writable.
enum PsStatus ps_solve_mcis(const struct PsInstance *inst,
                            const double *bounds,
                            uintptr_t len,
                            enum PsMetric metric,
                            int32_t brute_force,
                            char **solution_json);

// Maximum-utility selection within `budget`.
//
// # Safety
// `inst` must be a live handle and `solution_json` writable.
enum PsStatus ps_solve_mpis(const struct PsInstance *inst,
                            double budget,
                            enum PsMetric metric,
                            int32_t brute_force,
                            char **solution_json);

// Message of the last failure on this thread, or null after a success.
//
// The pointer stays valid until the next call on the same thread; do not
// free it.
const char *ps_last_error_message(void);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void ps_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENALTYSELECT_H */
