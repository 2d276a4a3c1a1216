#ifndef SRQUANT_H
#define SRQUANT_H

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SRQ_GROUPING_BW 0

#define SRQ_GROUPING_HS 1

#define SRQ_GROUPING_UN 2

#define SRQ_GROUPING_RS 3

typedef enum SrqStatus {
  SRQ_STATUS_OK = 0,
  SRQ_STATUS_NULL_POINTER = 1,
  SRQ_STATUS_INVALID_ARGUMENT = 2,
  SRQ_STATUS_TOO_MANY_COMPONENTS = 3,
  SRQ_STATUS_OUT_OF_RANGE = 4,
  SRQ_STATUS_NON_MONOTONE = 5,
  SRQ_STATUS_INCONSISTENT = 6,
  SRQ_STATUS_FORMAT = 7,
  SRQ_STATUS_VERSION = 8,
  SRQ_STATUS_TRUNCATED = 9,
  SRQ_STATUS_CHECKSUM = 10,
  SRQ_STATUS_IO = 11,
  SRQ_STATUS_BUFFER_TOO_SMALL = 12,
  SRQ_STATUS_PANIC = 13,
} SrqStatus;

/**
 * Component array with nominal and actual weights.
 */
typedef struct SrqArray SrqArray;

/**
 * Selected boundaries and their assemblies.
 */
typedef struct SrqQuantizer SrqQuantizer;

/**
 * Sorted references of one array.
 */
typedef struct SrqReferenceSet SrqReferenceSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *srq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srq_version(void);

/**
 * Builds a grouping. `s` and `n0_prime` are only read for `SRQ_GROUPING_RS`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SrqStatus srq_array_build(uint32_t grouping_tag,
                               uint32_t n0,
                               uint32_t s,
                               uint32_t n0_prime,
                               struct SrqArray **out);

/**
 * Builds an array from a raw nominal weight list summing to `2^n0 - 1`.
 *
 * # Safety
 * `weights` must point to `len` readable `uint32_t`; `out` must be writable.
 */
enum SrqStatus srq_array_from_nominal(uint32_t n0,
                                      const uint32_t *weights,
                                      size_t len,
                                      struct SrqArray **out);

/**
 * Draws actual weights for trial `trial` of a mismatch model with ratio
 * `sigma_m` and seed `seed`. The input array is left untouched.
 *
 * # Safety
 * `array` must be a live handle; `out` must be writable.
 */
enum SrqStatus srq_array_sample(const struct SrqArray *array,
                                double sigma_m,
                                uint64_t seed,
                                uint64_t trial,
                                struct SrqArray **out);

/**
 * Component count, or 0 for a null handle.
 *
 * # Safety
 * `array` must be null or a live handle.
 */
size_t srq_array_len(const struct SrqArray *array);

/**
 * # Safety
 * `array` must be null or a live handle.
 */
uint32_t srq_array_n0(const struct SrqArray *array);

/**
 * Copies the nominal weights into `buf` (capacity `cap` elements).
 *
 * # Safety
 * `array` must be a live handle and `buf` must hold `cap` writable elements.
 */
enum SrqStatus srq_array_nominal(const struct SrqArray *array, uint32_t *buf, size_t cap);

/**
 * Copies the actual weights into `buf` (capacity `cap` elements).
 *
 * # Safety
 * `array` must be a live handle and `buf` must hold `cap` writable elements.
 */
enum SrqStatus srq_array_actual(const struct SrqArray *array, double *buf, size_t cap);

/**
 * # Safety
 * `array` must be null or a handle not yet freed.
 */
void srq_array_free(struct SrqArray *array);

/**
 * Reference generated by `mask` under the array's actual weights.
 *
 * # Safety
 * `array` must be a live handle; `value` must be writable.
 */
enum SrqStatus srq_decode_assembly(const struct SrqArray *array, uint64_t mask, double *value);

/**
 * Enumerates all `2^n` references (n <= 26).
 *
 * # Safety
 * `array` must be a live handle; `out` must be writable.
 */
enum SrqStatus srq_references_enumerate(const struct SrqArray *array, struct SrqReferenceSet **out);

/**
 * # Safety
 * `refs` must be null or a live handle.
 */
size_t srq_references_len(const struct SrqReferenceSet *refs);

/**
 * Entry `index` of the sorted reference set.
 *
 * # Safety
 * `refs` must be a live handle; `value` and `mask` must be writable.
 */
enum SrqStatus srq_references_get(const struct SrqReferenceSet *refs,
                                  size_t index,
                                  double *value,
                                  uint64_t *mask);

/**
 * # Safety
 * `refs` must be null or a handle not yet freed.
 */
void srq_references_free(struct SrqReferenceSet *refs);

/**
 * Exact nearest-reference selection for every interior target `i / 2^nk`.
 *
 * # Safety
 * `refs` must be a live handle; `out` must be writable.
 */
enum SrqStatus srq_select_exhaustive(const struct SrqReferenceSet *refs,
                                     uint32_t nk,
                                     double delta,
                                     struct SrqQuantizer **out);

/**
 * Approximate greedy selection (descending-weight scan per target).
 *
 * # Safety
 * `array` must be a live handle; `out` must be writable.
 */
enum SrqStatus srq_select_greedy(const struct SrqArray *array,
                                 uint32_t nk,
                                 double delta,
                                 struct SrqQuantizer **out);

/**
 * Target resolution, or 0 for a null handle.
 *
 * # Safety
 * `q` must be null or a live handle.
 */
uint32_t srq_quantizer_nk(const struct SrqQuantizer *q);

/**
 * Copies the `2^nk + 1` boundaries into `buf`.
 *
 * # Safety
 * `q` must be a live handle and `buf` must hold `cap` writable elements.
 */
enum SrqStatus srq_quantizer_boundaries(const struct SrqQuantizer *q, double *buf, size_t cap);

/**
 * Copies the `2^nk - 1` interior masks into `buf`.
 *
 * # Safety
 * `q` must be a live handle and `buf` must hold `cap` writable elements.
 */
enum SrqStatus srq_quantizer_masks(const struct SrqQuantizer *q, uint64_t *buf, size_t cap);

/**
 * Code of `x` in `[0, 1)`.
 *
 * # Safety
 * `q` must be a live handle; `code` must be writable.
 */
enum SrqStatus srq_quantize(const struct SrqQuantizer *q, double x, uint64_t *code);

/**
 * Total mean-square error and entropy over the central `delta` fraction of codes.
 *
 * # Safety
 * `q` must be a live handle; `m_total` and `h` must be writable.
 */
enum SrqStatus srq_entropy(const struct SrqQuantizer *q, double delta, double *m_total, double *h);

/**
 * `nk + log2(delta)`.
 */
double srq_shannon_limit(uint32_t nk, double delta);

/**
 * Writes a calibration LUT. `bytes` (optional) receives the file size.
 *
 * # Safety
 * Handles must be live; `path` must be a NUL-terminated UTF-8 string;
 * `bytes` must be null or writable.
 */
enum SrqStatus srq_lut_export(const struct SrqQuantizer *q,
                              const struct SrqArray *array,
                              const char *path,
                              uint64_t *bytes);

/**
 * Reads and validates a calibration LUT.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `q_out` and `array_out`
 * must be writable.
 */
enum SrqStatus srq_lut_import(const char *path,
                              struct SrqQuantizer **q_out,
                              struct SrqArray **array_out);

/**
 * # Safety
 * `q` must be null or a handle not yet freed.
 */
void srq_quantizer_free(struct SrqQuantizer *q);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SRQUANT_H */
