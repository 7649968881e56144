/* Generated by cbindgen from the pgas-ffi crate. Do not edit. */

#ifndef PGAS_H
#define PGAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum pgas_status {
  PGAS_OK = 0,
  PGAS_ERR_NULL = 1,
  PGAS_ERR_USAGE = 2,
  PGAS_ERR_STARTUP = 3,
  PGAS_ERR_OUT_OF_RANGE = 4,
  PGAS_ERR_UNKNOWN_SEGMENT = 5,
  PGAS_ERR_ALLOCATION = 6,
  PGAS_ERR_INDEX = 7,
  PGAS_ERR_LENGTH = 8,
  PGAS_ERR_PARSE = 9,
  PGAS_ERR_PATTERN = 10,
  PGAS_ERR_LOCALITY = 11,
  PGAS_ERR_TRANSPORT = 12,
  PGAS_ERR_BENCHMARK = 13,
  PGAS_ERR_IO = 14,
  PGAS_ERR_UTF8 = 15,
  /**
   * A unit body passed to `pgas_run` returned nonzero.
   */
  PGAS_ERR_CALLBACK = 16,
  PGAS_ERR_PANIC = 17,
} pgas_status;

/**
 * Distributed array of `int64_t` with a BLOCKED distribution.
 */
typedef struct pgas_array_i64 pgas_array_i64;

/**
 * Runtime context of one unit.
 */
typedef struct pgas_context pgas_context;

/**
 * Distribution pattern.
 */
typedef struct pgas_pattern pgas_pattern;

/**
 * Body of one unit for [`pgas_run`]. The context is valid only during the call.
 */
typedef int (*pgas_unit_fn)(struct pgas_context *ctx, void *user_data);

/**
 * Global pointer in its 16-byte wire layout.
 */
typedef struct pgas_gptr {
  uint32_t unit;
  uint16_t segment;
  uint16_t flags;
  /**
   * Byte offset inside the segment.
   */
  uint64_t offset;
} pgas_gptr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes) and returns its full length without the NUL.
 * Returns 0 if there was no error. `buf` may be NULL to query the length.
 */
size_t pgas_last_error(char *buf, size_t len);

/**
 * Static name of a status code, e.g. "PGAS_ERR_PARSE".
 */
const char *pgas_status_name(enum pgas_status status);

/**
 * Initializes this process as one unit, configured from the `PGAS_*`
 * environment the launcher sets. Release with `pgas_context_free`.
 */
enum pgas_status pgas_init(struct pgas_context **out);

/**
 * Runs `body` on `n_units` threads of this process, one per unit, and
 * finalizes each unit afterwards. `user_data` is shared by all units.
 */
enum pgas_status pgas_run(size_t n_units, pgas_unit_fn body, void *user_data);

/**
 * Collective final barrier; releases all global memory of the unit.
 * Only for contexts from `pgas_init`; `pgas_run` finalizes its units itself.
 */
enum pgas_status pgas_finalize(struct pgas_context *ctx);

/**
 * Frees a context from `pgas_init`. NULL is ignored.
 */
void pgas_context_free(struct pgas_context *ctx);

enum pgas_status pgas_my_id(const struct pgas_context *ctx, uint32_t *out);

enum pgas_status pgas_n_units(const struct pgas_context *ctx, size_t *out);

enum pgas_status pgas_barrier(const struct pgas_context *ctx);

/**
 * Encodes a global pointer into its 16-byte little-endian form.
 */
enum pgas_status pgas_gptr_encode(struct pgas_gptr gptr, uint8_t *out);

enum pgas_status pgas_gptr_decode(const uint8_t *bytes, struct pgas_gptr *out);

/**
 * Parses a pattern such as "16x10 TILE(4),TILE(2) team 2x2 col".
 * `n_units` is used when the text has no team clause; pass 0 to require one.
 */
enum pgas_status pgas_pattern_parse(const char *text, size_t n_units, struct pgas_pattern **out);

void pgas_pattern_free(struct pgas_pattern *pattern);

/**
 * Total number of elements; 0 for NULL.
 */
size_t pgas_pattern_size(const struct pgas_pattern *pattern);

/**
 * Number of units the pattern distributes over; 0 for NULL.
 */
size_t pgas_pattern_n_units(const struct pgas_pattern *pattern);

enum pgas_status pgas_pattern_local_size(const struct pgas_pattern *pattern,
                                         uint32_t unit,
                                         size_t *out);

/**
 * Owner and local offset of the element with global linear index `index`.
 */
enum pgas_status pgas_pattern_local_of(const struct pgas_pattern *pattern,
                                       size_t index,
                                       uint32_t *unit,
                                       size_t *offset);

/**
 * Inverse of [`pgas_pattern_local_of`].
 */
enum pgas_status pgas_pattern_global_of(const struct pgas_pattern *pattern,
                                        uint32_t unit,
                                        size_t offset,
                                        size_t *index);

/**
 * Collectively allocates `n` elements over all units, zero-initialized.
 */
enum pgas_status pgas_array_i64_new(const struct pgas_context *ctx,
                                    size_t n,
                                    struct pgas_array_i64 **out);

/**
 * Collective: every unit frees its handle. NULL is ignored.
 */
void pgas_array_i64_free(struct pgas_array_i64 *array);

/**
 * Global length; 0 for NULL.
 */
size_t pgas_array_i64_len(const struct pgas_array_i64 *array);

/**
 * Reads element `index`, wherever it lives.
 */
enum pgas_status pgas_array_i64_get(const struct pgas_array_i64 *array, size_t index, int64_t *out);

/**
 * Writes element `index`. Visible to other units after a barrier.
 */
enum pgas_status pgas_array_i64_put(const struct pgas_array_i64 *array,
                                    size_t index,
                                    int64_t value);

/**
 * Global pointer to element `index`.
 */
enum pgas_status pgas_array_i64_gptr(const struct pgas_array_i64 *array,
                                     size_t index,
                                     struct pgas_gptr *out);

/**
 * The calling unit's block: a plain pointer and element count. The pointer
 * stays valid until the array is freed.
 */
enum pgas_status pgas_array_i64_local(struct pgas_array_i64 *array, int64_t **data, size_t *len);

/**
 * Collective: sets every element to `value`.
 */
enum pgas_status pgas_array_i64_fill(const struct pgas_array_i64 *array, int64_t value);

/**
 * Collective: sum of all elements (wrapping), returned on every unit.
 */
enum pgas_status pgas_array_i64_sum(const struct pgas_array_i64 *array, int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PGAS_H */
