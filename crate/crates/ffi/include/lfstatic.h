#ifndef LFSTATIC_H
#define LFSTATIC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum {
  LF_STATUS_OK = 0,
  // A required pointer argument was null.
  LF_STATUS_NULL_POINTER = 1,
  // An argument or parameter is out of range.
  LF_STATUS_INVALID_ARGUMENT = 2,
  // A file could not be read.
  LF_STATUS_IO = 3,
  // The calibration is malformed or describes an invalid rig.
  LF_STATUS_CALIBRATION = 4,
  // Image, prior or buffer sizes disagree with the rig.
  LF_STATUS_SIZE_MISMATCH = 5,
  // No usable support set could be built.
  LF_STATUS_DEGENERATE = 6,
  // An internal panic was caught at the boundary.
  LF_STATUS_PANIC = 7,
} LfStatus;

// One light-field frame plus its per-view static-probability priors,
// sized from a rig.
typedef struct LfFrame LfFrame;

// Output of `lf_reconstruct`.
typedef struct LfResult LfResult;

// Camera rig loaded from a calibration file.
typedef struct LfRig LfRig;

// Tunable parameters. Initialise with `lf_params_default`.
typedef struct {
  // Worker threads; 0 picks one per core.
  uint32_t threads;
  // Nonzero solves only pixels the reference prior marks dynamic.
  uint8_t dynamic_only;
  double beta;
  double threshold;
  uint32_t max_iters;
  uint32_t min_static_rays;
  double epsilon_prior;
  double sigma;
  double gamma;
  double d_max;
  double neighborhood_radius;
  uint32_t grid_stride;
  uint32_t min_texture;
  double uniqueness_ratio;
  double lr_tolerance;
  double disparity_step;
  double consistency_gap;
  uint32_t median_radius;
} LfParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or an empty
// string after a successful call. The pointer stays valid until the next
// call into this library on the same thread.
const char *lf_last_error_message(void);

// Loads a calibration file. A negative `ref_index` keeps the file's
// reference camera.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
LfStatus lf_rig_load(const char *path, int32_t ref_index, LfRig **out);

// Parses calibration text in the same format as `lf_rig_load`.
//
// # Safety
// `text` must be a nul-terminated string and `out` a valid pointer.
LfStatus lf_rig_parse(const char *text, int32_t ref_index, LfRig **out);

// Releases a rig. Null is ignored.
//
// # Safety
// `rig` must come from this library and not be used afterwards.
void lf_rig_free(LfRig *rig);

// Number of cameras in the rig.
//
// # Safety
// `rig` and `out` must be valid pointers.
LfStatus lf_rig_num_cameras(const LfRig *rig, uint32_t *out);

// Index of the reference camera.
//
// # Safety
// `rig` and `out` must be valid pointers.
LfStatus lf_rig_ref_index(const LfRig *rig, uint32_t *out);

// Image width and height shared by every camera.
//
// # Safety
// All pointers must be valid.
LfStatus lf_rig_image_size(const LfRig *rig, uint32_t *width, uint32_t *height);

// Maps reference pixel `(u, v)` at disparity `d` into camera `k`.
// `*visible` is set to 0 when the point lies behind camera `k`, in which
// case the output coordinates are left untouched.
//
// # Safety
// All pointers must be valid.
LfStatus lf_rig_warp(const LfRig *rig,
                     double u,
                     double v,
                     double d,
                     uint32_t k,
                     double *out_u,
                     double *out_v,
                     uint8_t *visible);

// Creates an empty frame for `rig`: black views and all-static priors.
//
// # Safety
// `rig` and `out` must be valid pointers.
LfStatus lf_frame_new(const LfRig *rig, LfFrame **out);

// Copies view `k` from row-major interleaved RGB bytes, `width * height * 3`
// of them.
//
// # Safety
// `frame` must be valid and `rgb` must point to `len` readable bytes.
LfStatus lf_frame_set_view(LfFrame *frame, uint32_t k, const uint8_t *rgb, size_t len);

// Copies the static-probability prior of view `k`, `width * height` values
// in `[0, 1]`, row-major.
//
// # Safety
// `frame` must be valid and `prior` must point to `len` readable floats.
LfStatus lf_frame_set_prior(LfFrame *frame, uint32_t k, const float *prior, size_t len);

// Releases a frame. Null is ignored.
//
// # Safety
// `frame` must come from this library and not be used afterwards.
void lf_frame_free(LfFrame *frame);

// Writes the default parameters to `out`.
//
// # Safety
// `out` must be a valid pointer.
LfStatus lf_params_default(LfParams *out);

// Estimates disparity and the refocused reference view. `params` may be
// null for defaults.
//
// # Safety
// `rig`, `frame` and `out` must be valid; `params` must be null or valid.
LfStatus lf_reconstruct(const LfRig *rig,
                        const LfFrame *frame,
                        const LfParams *params,
                        LfResult **out);

// Releases a result. Null is ignored.
//
// # Safety
// `result` must come from this library and not be used afterwards.
void lf_result_free(LfResult *result);

// Width and height of the result maps.
//
// # Safety
// All pointers must be valid.
LfStatus lf_result_size(const LfResult *result, uint32_t *width, uint32_t *height);

// Copies the reference-view disparity, row-major, into `out`; `len` must
// be at least `width * height`.
//
// # Safety
// `result` must be valid and `out` must point to `len` writable doubles.
LfStatus lf_result_disparity(const LfResult *result, double *out, size_t len);

// Copies the refocused reference view as interleaved RGB; `len` must be at
// least `width * height * 3`.
//
// # Safety
// `result` must be valid and `out` must point to `len` writable bytes.
LfStatus lf_result_refocused(const LfResult *result, uint8_t *out, size_t len);

// Copies the provenance codes (0 invalid, 128 fallback, 255 refocused or
// copied); `len` must be at least `width * height`.
//
// # Safety
// `result` must be valid and `out` must point to `len` writable bytes.
LfStatus lf_result_provenance(const LfResult *result, uint8_t *out, size_t len);

// Copies the per-pixel ray masks, `valid << 8 | static`, where bit `k` of
// each byte refers to camera `k`; `len` must be at least `width * height`.
//
// # Safety
// `result` must be valid and `out` must point to `len` writable values.
LfStatus lf_result_ray_masks(const LfResult *result, uint16_t *out, size_t len);

// EM iterations run and whether the loop converged (1) or hit the
// iteration cap (0).
//
// # Safety
// All pointers must be valid.
LfStatus lf_result_iterations(const LfResult *result, uint32_t *iterations, uint8_t *converged);

// Number of support points found.
//
// # Safety
// All pointers must be valid.
LfStatus lf_result_support_count(const LfResult *result, uint32_t *out);

// Total wall-clock seconds spent in the reconstruction.
//
// # Safety
// All pointers must be valid.
LfStatus lf_result_seconds(const LfResult *result, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFSTATIC_H */
