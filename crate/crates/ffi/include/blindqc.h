#ifndef BLINDQC_H
#define BLINDQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Largest number of branches an exact distribution may enumerate.
 */
#define BQC_EXACT_BUDGET (1 << 20)

typedef enum BqcStatus {
  BQC_STATUS_OK = 0,
  BQC_STATUS_NULL_POINTER = 1,
  BQC_STATUS_INVALID_UTF8 = 2,
  BQC_STATUS_INVALID_INPUT = 3,
  BQC_STATUS_PROTOCOL_FAULT = 4,
  BQC_STATUS_BUFFER_TOO_SMALL = 5,
  BQC_STATUS_PANIC = 6,
} BqcStatus;

typedef enum BqcVariant {
  BQC_VARIANT_BFK = 0,
  BQC_VARIANT_DOUBLE = 1,
  BQC_VARIANT_TRIPLE = 2,
  BQC_VARIANT_SINGLE = 3,
  BQC_VARIANT_SINGLE_CLASSICAL = 4,
} BqcVariant;

typedef struct BqcComputation BqcComputation;

typedef struct BqcConfig BqcConfig;

typedef struct BqcRunResult BqcRunResult;

/**
 * Counts from repeated decoy checks against a Bell-guessing server.
 */
typedef struct BqcDetection {
  uint64_t trials;
  uint64_t caught;
  uint64_t accepted_incorrect;
  uint64_t checked;
  uint64_t mismatches;
} BqcDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *bqc_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void bqc_string_free(char *s);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum BqcStatus bqc_computation_from_json(const char *json, struct BqcComputation **out);

/**
 * Linear cluster of `len + 1` vertices measured at `angles[i]·π/4`.
 *
 * # Safety
 * `angles` must point to `len` values (or be NULL with `len == 0`).
 */
enum BqcStatus bqc_computation_linear(const int64_t *angles,
                                      size_t len,
                                      struct BqcComputation **out);

/**
 * Vertex count, or 0 for NULL.
 *
 * # Safety
 * `comp` must be NULL or a live handle.
 */
size_t bqc_computation_num_vertices(const struct BqcComputation *comp);

/**
 * # Safety
 * `comp` must be NULL or a handle not yet freed.
 */
void bqc_computation_free(struct BqcComputation *comp);

/**
 * Default configuration of a protocol variant.
 *
 * # Safety
 * `out` must be writable.
 */
enum BqcStatus bqc_config_new(enum BqcVariant variant, struct BqcConfig **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum BqcStatus bqc_config_from_json(const char *json, struct BqcConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum BqcStatus bqc_config_set_seed(struct BqcConfig *cfg, uint64_t seed);

/**
 * Serialized configuration.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum BqcStatus bqc_config_to_json(const struct BqcConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void bqc_config_free(struct BqcConfig *cfg);

/**
 * Runs one protocol execution, retrying failed forwarding rounds. An abort
 * is a successful call; inspect it with [`bqc_result_abort_reason`].
 *
 * # Safety
 * `cfg` and `comp` must be live handles; `out` must be writable.
 */
enum BqcStatus bqc_run(const struct BqcConfig *cfg,
                       const struct BqcComputation *comp,
                       struct BqcRunResult **out);

/**
 * Short abort name (`policy`, `cheating`, `retry`), or NULL if the run
 * completed. The string is static.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
const char *bqc_result_abort_reason(const struct BqcRunResult *res);

/**
 * Attempts used, or 0 for NULL.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
size_t bqc_result_attempts(const struct BqcRunResult *res);

/**
 * Copies the output bits into `buf`. `len` receives the bit count, also when
 * the buffer is too small. Fails with `InvalidInput` on an aborted run.
 *
 * # Safety
 * `res` must be a live handle; `buf` must hold `cap` bytes; `len` must be
 * writable.
 */
enum BqcStatus bqc_result_output(const struct BqcRunResult *res,
                                 uint8_t *buf,
                                 size_t cap,
                                 size_t *len);

/**
 * Transcript of the run, one JSON record per line.
 *
 * # Safety
 * `res` must be a live handle; `out` must be writable.
 */
enum BqcStatus bqc_result_transcript_jsonl(const struct BqcRunResult *res, char **out);

/**
 * # Safety
 * `res` must be NULL or a handle not yet freed.
 */
void bqc_result_free(struct BqcRunResult *res);

/**
 * Exact output distribution of a protocol, as a JSON object
 * `{"distribution": {bits: p}, "aborted": {name: p}, "paths": n}`.
 *
 * # Safety
 * `cfg` and `comp` must be live handles; `out` must be writable.
 */
enum BqcStatus bqc_exact_distribution_json(const struct BqcConfig *cfg,
                                           const struct BqcComputation *comp,
                                           char **out);

/**
 * Output distribution of the computation run without any protocol, as a
 * JSON object `{bits: p}`.
 *
 * # Safety
 * `comp` must be a live handle; `out` must be writable.
 */
enum BqcStatus bqc_oracle_distribution_json(const struct BqcComputation *comp, char **out);

/**
 * Repeats the decoy check `trials` times against a Bell-guessing server
 * with `h` decoys of which `l` are checked.
 *
 * # Safety
 * `out` must be writable.
 */
enum BqcStatus bqc_detection(size_t l,
                             size_t h,
                             uint64_t trials,
                             uint64_t seed,
                             struct BqcDetection *out);

/**
 * Largest total-variation distance between the server's views for two
 * secret angles of a single real qubit in a stream of `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BqcStatus bqc_leak_score(size_t n, bool equalizing, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLINDQC_H */
