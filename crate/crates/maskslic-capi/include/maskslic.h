#ifndef MASKSLIC_H
#define MASKSLIC_H

/* Generated by cbindgen from maskslic-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum MslStatus {
  MSL_STATUS_OK = 0,
  MSL_STATUS_DIMS_MISMATCH = 1,
  MSL_STATUS_EMPTY_MASK = 2,
  MSL_STATUS_OUT_OF_BOUNDS = 3,
  MSL_STATUS_TOO_MANY_SEEDS = 4,
  MSL_STATUS_NO_SEEDS_IN_MASK = 5,
  MSL_STATUS_DEGENERATE_DATA = 6,
  MSL_STATUS_TOO_FEW_ITEMS = 7,
  MSL_STATUS_DIVISION_BY_ZERO = 8,
  MSL_STATUS_BAD_MAGIC = 9,
  MSL_STATUS_VERSION_UNSUPPORTED = 10,
  MSL_STATUS_TRUNCATED_PAYLOAD = 11,
  MSL_STATUS_BAD_SPEC = 12,
  MSL_STATUS_INVALID_INPUT = 13,
  MSL_STATUS_IO = 14,
  MSL_STATUS_NULL_ARGUMENT = 100,
  MSL_STATUS_PANIC = 101,
} MslStatus;

/**
 * Clustering backend selector.
 */
typedef enum MslBackend {
  MSL_BACKEND_MASK_SLIC = 0,
  MSL_BACKEND_NAIVE_WHOLE_IMAGE = 1,
  MSL_BACKEND_NAIVE_GRID_FILTERED = 2,
} MslBackend;

typedef struct MslLabeling MslLabeling;

typedef struct MslMask MslMask;

typedef struct MslVolume MslVolume;

/**
 * Segmentation parameters, passed by value.
 */
typedef struct MslParams {
  size_t n_regions;
  double compactness;
  size_t max_iters;
  double residual_tol;
  bool enforce_connectivity;
  enum MslBackend backend;
} MslParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. Borrowed; valid until
 * the next failing call on the same thread.
 */
const char *msl_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *msl_version(void);

/**
 * Builds a feature volume from a sample buffer laid out with the last
 * spatial axis fastest and the channel innermost.
 *
 * # Safety
 * `dims` and `spacing` must point to `ndim` readable elements, `data` to
 * `data_len` readable doubles, and `out` must be a valid destination.
 */
enum MslStatus msl_volume_create(const size_t *dims,
                                 size_t ndim,
                                 size_t channels,
                                 const double *spacing,
                                 const double *data,
                                 size_t data_len,
                                 struct MslVolume **out);

/**
 * Reads a volume file (time series files are rejected here).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid destination.
 */
enum MslStatus msl_volume_read(const char *path, struct MslVolume **out);

/**
 * # Safety
 * `volume` must be a handle from this library, not yet freed, or null.
 */
void msl_volume_free(struct MslVolume *volume);

/**
 * Builds a mask from a byte buffer (nonzero = foreground).
 *
 * # Safety
 * `dims` must point to `ndim` elements and `bits` to `bits_len` bytes;
 * `out` must be a valid destination.
 */
enum MslStatus msl_mask_create(const size_t *dims,
                               size_t ndim,
                               const uint8_t *bits,
                               size_t bits_len,
                               struct MslMask **out);

/**
 * Reads a mask file (nonzero samples are foreground).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid destination.
 */
enum MslStatus msl_mask_read(const char *path, struct MslMask **out);

/**
 * # Safety
 * `mask` must be a handle from this library, not yet freed, or null.
 */
void msl_mask_free(struct MslMask *mask);

/**
 * Runs the selected segmentation backend.
 *
 * # Safety
 * `volume` and `mask` must be live handles; `out` a valid destination.
 */
enum MslStatus msl_segment(const struct MslVolume *volume,
                           const struct MslMask *mask,
                           struct MslParams params,
                           struct MslLabeling **out);

/**
 * Number of distinct regions of a labeling; 0 for a null handle.
 *
 * # Safety
 * `labeling` must be a live handle or null.
 */
size_t msl_labeling_num_regions(const struct MslLabeling *labeling);

/**
 * Number of voxels in the label grid; 0 for a null handle.
 *
 * # Safety
 * `labeling` must be a live handle or null.
 */
size_t msl_labeling_len(const struct MslLabeling *labeling);

/**
 * Borrowed view of the label grid (-1 marks background), valid while the
 * handle lives. Null for a null handle.
 *
 * # Safety
 * `labeling` must be a live handle or null.
 */
const int32_t *msl_labeling_data(const struct MslLabeling *labeling);

/**
 * Writes a labeling to a volume file (single-channel i32 payload).
 *
 * # Safety
 * `labeling` must be a live handle and `path` a valid NUL-terminated string.
 */
enum MslStatus msl_labeling_write(const struct MslLabeling *labeling, const char *path);

/**
 * Reads a labeling from a volume file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid destination.
 */
enum MslStatus msl_labeling_read(const char *path, struct MslLabeling **out);

/**
 * # Safety
 * `labeling` must be a handle from this library, not yet freed, or null.
 */
void msl_labeling_free(struct MslLabeling *labeling);

/**
 * Mean best-overlap inconsistency between two labelings after shifting the
 * first by `offset` (`offset_len` entries, one per axis).
 *
 * # Safety
 * `a` and `b` must be live handles, `offset` must point to `offset_len`
 * elements and `c_s_out` must be a valid destination.
 */
enum MslStatus msl_consistency_score(const struct MslLabeling *a,
                                     const struct MslLabeling *b,
                                     const int64_t *offset,
                                     size_t offset_len,
                                     double *c_s_out);

/**
 * Voxel-weighted label consistency of a labeling against a ground-truth
 * grid (same length as the label grid), restricted to `mask`.
 *
 * # Safety
 * Handles must be live, `truth` must point to `truth_len` elements, and the
 * out pointers must be valid destinations.
 */
enum MslStatus msl_label_consistency(const struct MslLabeling *labeling,
                                     const int32_t *truth,
                                     size_t truth_len,
                                     const struct MslMask *mask,
                                     double *lc_out,
                                     double *e_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MASKSLIC_H */
