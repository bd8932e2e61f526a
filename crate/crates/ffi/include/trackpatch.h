/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TRACKPATCH_H
#define TRACKPATCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum TpStatus {
  TP_STATUS_OK = 0,
  /*
   A required pointer was null.
   */
  TP_STATUS_NULL_POINTER = 1,
  /*
   Arguments were rejected (bad sizes, degenerate boxes, invalid config).
   */
  TP_STATUS_INVALID_ARGUMENT = 2,
  /*
   The output buffer is too small; the required length was written back.
   */
  TP_STATUS_BUFFER_TOO_SMALL = 3,
  /*
   The quantity is undefined for these inputs (for example a zero denominator).
   */
  TP_STATUS_UNDEFINED = 4,
  /*
   A panic was caught inside the library.
   */
  TP_STATUS_PANIC = 5,
} TpStatus;

/*
 Opaque tracker handle.
 */
typedef struct TpTracker TpTracker;

/*
 Axis-aligned box, top-left corner plus size.
 */
typedef struct TpBox {
  double x;
  double y;
  double w;
  double h;
} TpBox;

/*
 Association thresholds and track lifetime. Kalman noise keeps its defaults.
 */
typedef struct TpTrackerConfig {
  double high_thresh;
  double low_thresh;
  double iou_gate_1;
  double iou_gate_2;
  uint32_t max_age;
  uint32_t min_hits;
  /*
   Nonzero confirms tracks born on the first frame at once.
   */
  uint8_t confirm_on_first_frame;
} TpTrackerConfig;

typedef struct TpDetection {
  struct TpBox bbox;
  double score;
} TpDetection;

/*
 A confirmed track reported for the last processed frame.
 */
typedef struct TpTrack {
  uint64_t id;
  struct TpBox bbox;
  double score;
} TpTrack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *tp_version(void);

/*
 Message of the last failed call on this thread, empty after a success. The pointer
 stays valid until the next call on the same thread.
 */
const char *tp_last_error(void);

/*
 Intersection over union; 0 when the union is empty.
 */
double tp_iou(struct TpBox a, struct TpBox b);

/*
 Minimum-cost assignment over a row-major `rows x cols` cost grid. Pairs costing more
 than `gate` (or non-finite) are never matched; pass infinity for no gate.
 `row_to_col` receives `rows` entries, -1 for an unmatched row.

 # Safety
 `costs` must point to `rows * cols` doubles and `row_to_col` to `rows` slots.
 */
enum TpStatus tp_assignment_solve(const double *costs,
                                  size_t rows,
                                  size_t cols,
                                  double gate,
                                  int64_t *row_to_col,
                                  double *total_cost);

/*
 Fills `out` with the default tracker configuration.

 # Safety
 `out` must be null or point to writable memory for one config.
 */
enum TpStatus tp_tracker_config_default(struct TpTrackerConfig *out);

/*
 Creates a tracker. A null `config` selects the defaults.

 # Safety
 `config` must be null or valid; `out` must be writable.
 */
enum TpStatus tp_tracker_new(const struct TpTrackerConfig *config, struct TpTracker **out);

/*
 Releases a tracker. Null is ignored.

 # Safety
 `tracker` must come from [`tp_tracker_new`] and not be used afterwards.
 */
void tp_tracker_free(struct TpTracker *tracker);

/*
 Processes the next frame and writes the number of reported tracks to `n_tracks`.
 Fetch them with [`tp_tracker_tracks`].

 # Safety
 `tracker` must be a live handle and `detections` must point to `n` entries.
 */
enum TpStatus tp_tracker_step(struct TpTracker *tracker,
                              const struct TpDetection *detections,
                              size_t n,
                              size_t *n_tracks);

/*
 Copies the tracks of the last step into `out`. When `capacity` is too small nothing
 is copied, `n_tracks` receives the required length and the call returns
 [`TpStatus::BufferTooSmall`].

 # Safety
 `tracker` must be a live handle and `out` must have room for `capacity` tracks.
 */
enum TpStatus tp_tracker_tracks(const struct TpTracker *tracker,
                                struct TpTrack *out,
                                size_t capacity,
                                size_t *n_tracks);

/*
 Number of frames processed so far.

 # Safety
 `tracker` must be null or a live handle.
 */
uint32_t tp_tracker_frame(const struct TpTracker *tracker);

/*
 Combined MOTA and IDF1 decline per attacked-box percentage point.

 # Safety
 `out` must be writable.
 */
enum TpStatus tp_tasr(double clean_mota,
                      double clean_idf1,
                      double attacked_mota,
                      double attacked_idf1,
                      double r_bbox,
                      double *out);

/*
 Identity switches per achievable switch, in percent.

 # Safety
 `out` must be writable.
 */
enum TpStatus tp_ior(double d_s, uint32_t n_frames, uint32_t t, double *out);

/*
 False-positive and switch increases per attackable unit, in percent.

 # Safety
 `out` must be writable.
 */
enum TpStatus tp_stasr(double fp_increase,
                       double idsw_increase,
                       double p_t,
                       double p_n,
                       double *out);

/*
 Box term of the patch loss for `n` patch/target pairs in a `width x height` frame.

 # Safety
 `patch_boxes` and `target_boxes` must point to `n` boxes; `out` must be writable.
 */
enum TpStatus tp_loss_bbr(const struct TpBox *patch_boxes,
                          const struct TpBox *target_boxes,
                          size_t n,
                          double width,
                          double height,
                          double *out);

/*
 Total variation of a patch stored row-major with interleaved RGB, `height * width * 3`
 values.

 # Safety
 `pixels` must point to `height * width * 3` doubles; `out` must be writable.
 */
enum TpStatus tp_loss_tv(const double *pixels, size_t height, size_t width, double *out);

/*
 Mean of `n` detection scores.

 # Safety
 `scores` must point to `n` doubles; `out` must be writable.
 */
enum TpStatus tp_loss_ap(const double *scores, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACKPATCH_H */
