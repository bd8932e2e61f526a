//! C ABI over the trackpatch library.
//!
//! Every fallible function returns a [`TpStatus`] and writes its result through an out
//! pointer. On failure a message for the calling thread is available from
//! [`tp_last_error`]. Panics never cross the boundary; they surface as
//! [`TpStatus::Panic`]. The tracker is an opaque handle owned by the caller and released
//! with [`tp_tracker_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use trackpatch::assignment::{solve, CostMatrix};
use trackpatch::geometry::{iou, BBox, FrameDims};
use trackpatch::metrics::{self, Accuracy};
use trackpatch::patchopt::{loss_ap, loss_bbr, loss_tv, Patch};
use trackpatch::tracker::{Detection, Tracker, TrackerConfig};
use trackpatch::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Arguments were rejected (bad sizes, degenerate boxes, invalid config).
    InvalidArgument = 2,
    /// The output buffer is too small; the required length was written back.
    BufferTooSmall = 3,
    /// The quantity is undefined for these inputs (for example a zero denominator).
    Undefined = 4,
    /// A panic was caught inside the library.
    Panic = 5,
}

/// Axis-aligned box, top-left corner plus size.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpDetection {
    pub bbox: TpBox,
    pub score: f64,
}

/// A confirmed track reported for the last processed frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpTrack {
    pub id: u64,
    pub bbox: TpBox,
    pub score: f64,
}

/// Association thresholds and track lifetime. Kalman noise keeps its defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpTrackerConfig {
    pub high_thresh: f64,
    pub low_thresh: f64,
    pub iou_gate_1: f64,
    pub iou_gate_2: f64,
    pub max_age: u32,
    pub min_hits: u32,
    /// Nonzero confirms tracks born on the first frame at once.
    pub confirm_on_first_frame: u8,
}

/// Opaque tracker handle.
pub struct TpTracker {
    tracker: Tracker,
    last: Vec<TpTrack>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TpStatus {
    match e {
        Error::Undefined { .. } => TpStatus::Undefined,
        _ => TpStatus::InvalidArgument,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), TpStatus>) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside trackpatch");
            TpStatus::Panic
        }
    }
}

fn fail(e: Error) -> TpStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TpStatus {
    set_error(format!("{what} is null"));
    TpStatus::NullPointer
}

fn invalid(msg: impl Into<String>) -> TpStatus {
    set_error(msg);
    TpStatus::InvalidArgument
}

/// Borrows `n` elements, accepting a null pointer only when `n == 0`.
unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], TpStatus> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(slice::from_raw_parts(p, n))
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), TpStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

impl From<TpBox> for BBox {
    fn from(b: TpBox) -> Self {
        BBox::new(b.x, b.y, b.w, b.h)
    }
}

impl From<BBox> for TpBox {
    fn from(b: BBox) -> Self {
        TpBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

impl From<TrackerConfig> for TpTrackerConfig {
    fn from(c: TrackerConfig) -> Self {
        TpTrackerConfig {
            high_thresh: c.high_thresh,
            low_thresh: c.low_thresh,
            iou_gate_1: c.iou_gate_1,
            iou_gate_2: c.iou_gate_2,
            max_age: c.max_age,
            min_hits: c.min_hits,
            confirm_on_first_frame: c.confirm_on_first_frame as u8,
        }
    }
}

impl From<TpTrackerConfig> for TrackerConfig {
    fn from(c: TpTrackerConfig) -> Self {
        TrackerConfig {
            high_thresh: c.high_thresh,
            low_thresh: c.low_thresh,
            iou_gate_1: c.iou_gate_1,
            iou_gate_2: c.iou_gate_2,
            max_age: c.max_age,
            min_hits: c.min_hits,
            confirm_on_first_frame: c.confirm_on_first_frame != 0,
            ..TrackerConfig::default()
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Intersection over union; 0 when the union is empty.
#[no_mangle]
pub extern "C" fn tp_iou(a: TpBox, b: TpBox) -> f64 {
    iou(&a.into(), &b.into())
}

/// Minimum-cost assignment over a row-major `rows x cols` cost grid. Pairs costing more
/// than `gate` (or non-finite) are never matched; pass infinity for no gate.
/// `row_to_col` receives `rows` entries, -1 for an unmatched row.
///
/// # Safety
/// `costs` must point to `rows * cols` doubles and `row_to_col` to `rows` slots.
#[no_mangle]
pub unsafe extern "C" fn tp_assignment_solve(
    costs: *const f64,
    rows: usize,
    cols: usize,
    gate: f64,
    row_to_col: *mut i64,
    total_cost: *mut f64,
) -> TpStatus {
    guard(|| {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("cost grid size overflows"))?;
        let costs = input(costs, n, "costs")?.to_vec();
        if gate.is_nan() {
            return Err(invalid("gate is NaN"));
        }
        if rows > 0 && row_to_col.is_null() {
            return Err(null("row_to_col"));
        }
        let c = CostMatrix::new(rows, cols, costs, gate);
        let a = solve(&c);
        if rows > 0 {
            let out = slice::from_raw_parts_mut(row_to_col, rows);
            out.fill(-1);
            for &(r, col) in &a.matches {
                out[r] = col as i64;
            }
        }
        if !total_cost.is_null() {
            total_cost.write(c.total_cost(&a.matches));
        }
        Ok(())
    })
}

/// Fills `out` with the default tracker configuration.
///
/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_config_default(out: *mut TpTrackerConfig) -> TpStatus {
    guard(|| write(out, TrackerConfig::default().into(), "out"))
}

/// Creates a tracker. A null `config` selects the defaults.
///
/// # Safety
/// `config` must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_new(config: *const TpTrackerConfig, out: *mut *mut TpTracker) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = match config.as_ref() {
            Some(c) => TrackerConfig::from(*c),
            None => TrackerConfig::default(),
        };
        let tracker = Tracker::new(cfg).map_err(fail)?;
        out.write(Box::into_raw(Box::new(TpTracker {
            tracker,
            last: Vec::new(),
        })));
        Ok(())
    })
}

/// Releases a tracker. Null is ignored.
///
/// # Safety
/// `tracker` must come from [`tp_tracker_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_free(tracker: *mut TpTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Processes the next frame and writes the number of reported tracks to `n_tracks`.
/// Fetch them with [`tp_tracker_tracks`].
///
/// # Safety
/// `tracker` must be a live handle and `detections` must point to `n` entries.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_step(
    tracker: *mut TpTracker,
    detections: *const TpDetection,
    n: usize,
    n_tracks: *mut usize,
) -> TpStatus {
    guard(|| {
        let h = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        let frame = h.tracker.frame() + 1;
        let dets: Vec<Detection> = input(detections, n, "detections")?
            .iter()
            .map(|d| Detection::new(d.bbox.into(), d.score, frame))
            .collect();
        let output = h.tracker.step(&dets).map_err(fail)?;
        h.last = output
            .tracks
            .iter()
            .map(|t| TpTrack {
                id: t.id,
                bbox: t.bbox.into(),
                score: t.score,
            })
            .collect();
        if !n_tracks.is_null() {
            n_tracks.write(h.last.len());
        }
        Ok(())
    })
}

/// Copies the tracks of the last step into `out`. When `capacity` is too small nothing
/// is copied, `n_tracks` receives the required length and the call returns
/// [`TpStatus::BufferTooSmall`].
///
/// # Safety
/// `tracker` must be a live handle and `out` must have room for `capacity` tracks.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_tracks(
    tracker: *const TpTracker,
    out: *mut TpTrack,
    capacity: usize,
    n_tracks: *mut usize,
) -> TpStatus {
    guard(|| {
        let h = tracker.as_ref().ok_or_else(|| null("tracker"))?;
        write(n_tracks, h.last.len(), "n_tracks")?;
        if capacity < h.last.len() {
            set_error(format!("need room for {} tracks, got {capacity}", h.last.len()));
            return Err(TpStatus::BufferTooSmall);
        }
        if !h.last.is_empty() {
            if out.is_null() {
                return Err(null("out"));
            }
            ptr::copy_nonoverlapping(h.last.as_ptr(), out, h.last.len());
        }
        Ok(())
    })
}

/// Number of frames processed so far.
///
/// # Safety
/// `tracker` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_tracker_frame(tracker: *const TpTracker) -> u32 {
    tracker.as_ref().map_or(0, |h| h.tracker.frame())
}

/// Combined MOTA and IDF1 decline per attacked-box percentage point.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_tasr(
    clean_mota: f64,
    clean_idf1: f64,
    attacked_mota: f64,
    attacked_idf1: f64,
    r_bbox: f64,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let clean = Accuracy {
            mota: clean_mota,
            idf1: clean_idf1,
        };
        let attacked = Accuracy {
            mota: attacked_mota,
            idf1: attacked_idf1,
        };
        write(out, metrics::tasr(&clean, &attacked, r_bbox).map_err(fail)?, "out")
    })
}

/// Identity switches per achievable switch, in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_ior(d_s: f64, n_frames: u32, t: u32, out: *mut f64) -> TpStatus {
    guard(|| write(out, metrics::ior(d_s, n_frames, t).map_err(fail)?, "out"))
}

/// False-positive and switch increases per attackable unit, in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_stasr(fp_increase: f64, idsw_increase: f64, p_t: f64, p_n: f64, out: *mut f64) -> TpStatus {
    guard(|| {
        write(
            out,
            metrics::stasr(fp_increase, idsw_increase, p_t, p_n).map_err(fail)?,
            "out",
        )
    })
}

/// Box term of the patch loss for `n` patch/target pairs in a `width x height` frame.
///
/// # Safety
/// `patch_boxes` and `target_boxes` must point to `n` boxes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_loss_bbr(
    patch_boxes: *const TpBox,
    target_boxes: *const TpBox,
    n: usize,
    width: f64,
    height: f64,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let p: Vec<BBox> = input(patch_boxes, n, "patch_boxes")?
            .iter()
            .map(|&b| b.into())
            .collect();
        let t: Vec<BBox> = input(target_boxes, n, "target_boxes")?
            .iter()
            .map(|&b| b.into())
            .collect();
        let dims = FrameDims::new(width, height).map_err(fail)?;
        write(out, loss_bbr(&p, &t, &dims).map_err(fail)?, "out")
    })
}

/// Total variation of a patch stored row-major with interleaved RGB, `height * width * 3`
/// values.
///
/// # Safety
/// `pixels` must point to `height * width * 3` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_loss_tv(pixels: *const f64, height: usize, width: usize, out: *mut f64) -> TpStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(3))
            .ok_or_else(|| invalid("patch size overflows"))?;
        let patch = Patch::from_pixels(height, width, input(pixels, n, "pixels")?.to_vec()).map_err(fail)?;
        write(out, loss_tv(&patch).map_err(fail)?, "out")
    })
}

/// Mean of `n` detection scores.
///
/// # Safety
/// `scores` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_loss_ap(scores: *const f64, n: usize, out: *mut f64) -> TpStatus {
    guard(|| write(out, loss_ap(input(scores, n, "scores")?).map_err(fail)?, "out"))
}
