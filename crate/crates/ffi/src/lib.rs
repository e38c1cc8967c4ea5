//! C ABI for `lfstatic`.
//!
//! Every function returns an `LfStatus`. On failure the thread's last error
//! message is set and can be read with `lf_last_error_message`. Handles are
//! opaque; each `*_new`/`*_load`/`lf_reconstruct` result must be released
//! with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lfstatic::frame::LightFieldFrame;
use lfstatic::geometry::{parse_calibration, read_calibration, CameraRig, PixelCoord};
use lfstatic::pipeline::{self, Reconstruction, RunConfig};
use lfstatic::raster::{Plane, RgbImage};
use lfstatic::solver::SegmentationPriorMaps;
use lfstatic::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or parameter is out of range.
    InvalidArgument = 2,
    /// A file could not be read.
    Io = 3,
    /// The calibration is malformed or describes an invalid rig.
    Calibration = 4,
    /// Image, prior or buffer sizes disagree with the rig.
    SizeMismatch = 5,
    /// No usable support set could be built.
    Degenerate = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

/// Camera rig loaded from a calibration file.
pub struct LfRig {
    rig: CameraRig,
}

/// One light-field frame plus its per-view static-probability priors,
/// sized from a rig.
pub struct LfFrame {
    width: usize,
    height: usize,
    views: Vec<RgbImage>,
    priors: Vec<Plane<f32>>,
}

/// Output of `lf_reconstruct`.
pub struct LfResult {
    rec: Reconstruction,
}

/// Tunable parameters. Initialise with `lf_params_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfParams {
    /// Worker threads; 0 picks one per core.
    pub threads: u32,
    /// Nonzero solves only pixels the reference prior marks dynamic.
    pub dynamic_only: u8,
    pub beta: f64,
    pub threshold: f64,
    pub max_iters: u32,
    pub min_static_rays: u32,
    pub epsilon_prior: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub d_max: f64,
    pub neighborhood_radius: f64,
    pub grid_stride: u32,
    pub min_texture: u32,
    pub uniqueness_ratio: f64,
    pub lr_tolerance: f64,
    pub disparity_step: f64,
    pub consistency_gap: f64,
    pub median_radius: u32,
}

impl From<&RunConfig> for LfParams {
    fn from(c: &RunConfig) -> Self {
        LfParams {
            threads: c.threads as u32,
            dynamic_only: c.dynamic_only as u8,
            beta: c.beta,
            threshold: c.threshold,
            max_iters: c.max_iters as u32,
            min_static_rays: c.min_static_rays as u32,
            epsilon_prior: c.epsilon_prior,
            sigma: c.sigma,
            gamma: c.gamma,
            d_max: c.d_max,
            neighborhood_radius: c.neighborhood_radius,
            grid_stride: c.grid_stride as u32,
            min_texture: c.min_texture,
            uniqueness_ratio: c.uniqueness_ratio,
            lr_tolerance: c.lr_tolerance,
            disparity_step: c.disparity_step,
            consistency_gap: c.consistency_gap,
            median_radius: c.median_radius as u32,
        }
    }
}

impl LfParams {
    fn to_config(self) -> RunConfig {
        RunConfig {
            threads: self.threads as usize,
            dynamic_only: self.dynamic_only != 0,
            beta: self.beta,
            threshold: self.threshold,
            max_iters: self.max_iters as usize,
            min_static_rays: self.min_static_rays as usize,
            epsilon_prior: self.epsilon_prior,
            sigma: self.sigma,
            gamma: self.gamma,
            d_max: self.d_max,
            neighborhood_radius: self.neighborhood_radius,
            grid_stride: self.grid_stride as usize,
            min_texture: self.min_texture,
            uniqueness_ratio: self.uniqueness_ratio,
            lr_tolerance: self.lr_tolerance,
            disparity_step: self.disparity_step,
            consistency_gap: self.consistency_gap,
            median_radius: self.median_radius as usize,
            ..RunConfig::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LfStatus {
    match e {
        Error::Io { .. } | Error::Image { .. } | Error::MissingArtifact(_) | Error::Parse { .. } => LfStatus::Io,
        Error::Calibration { .. } | Error::InvalidRig(_) | Error::InvalidCamera(_) => LfStatus::Calibration,
        Error::SizeMismatch { .. } | Error::ImageTooSmall { .. } => LfStatus::SizeMismatch,
        Error::DegenerateSupport(_) => LfStatus::Degenerate,
        _ => LfStatus::InvalidArgument,
    }
}

/// Failure carried back to the boundary.
struct Fail(LfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> Fail {
    Fail(LfStatus::InvalidArgument, message)
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            LfStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {message}"));
            LfStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Fail(
            LfStatus::SizeMismatch,
            format!("{what} holds {len} elements, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

fn ref_override(ref_index: i32) -> Option<usize> {
    usize::try_from(ref_index).ok()
}

/// Message describing the last failed call on this thread, or an empty
/// string after a successful call. The pointer stays valid until the next
/// call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a calibration file. A negative `ref_index` keeps the file's
/// reference camera.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_load(path: *const c_char, ref_index: i32, out: *mut *mut LfRig) -> LfStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let rig = read_calibration(Path::new(str_arg(path, "path")?), ref_override(ref_index))?;
        *out = Box::into_raw(Box::new(LfRig { rig }));
        Ok(())
    })
}

/// Parses calibration text in the same format as `lf_rig_load`.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_parse(text: *const c_char, ref_index: i32, out: *mut *mut LfRig) -> LfStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let rig = parse_calibration(str_arg(text, "text")?, ref_override(ref_index))?;
        *out = Box::into_raw(Box::new(LfRig { rig }));
        Ok(())
    })
}

/// Releases a rig. Null is ignored.
///
/// # Safety
/// `rig` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_free(rig: *mut LfRig) {
    if !rig.is_null() {
        drop(Box::from_raw(rig));
    }
}

/// Number of cameras in the rig.
///
/// # Safety
/// `rig` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_num_cameras(rig: *const LfRig, out: *mut u32) -> LfStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(rig, "rig")?.rig.num_cameras() as u32;
        Ok(())
    })
}

/// Index of the reference camera.
///
/// # Safety
/// `rig` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_ref_index(rig: *const LfRig, out: *mut u32) -> LfStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(rig, "rig")?.rig.ref_index() as u32;
        Ok(())
    })
}

/// Image width and height shared by every camera.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_image_size(rig: *const LfRig, width: *mut u32, height: *mut u32) -> LfStatus {
    guard(|| {
        let (w, h) = as_ref(rig, "rig")?.rig.image_dims();
        *as_mut(width, "width")? = w as u32;
        *as_mut(height, "height")? = h as u32;
        Ok(())
    })
}

/// Maps reference pixel `(u, v)` at disparity `d` into camera `k`.
/// `*visible` is set to 0 when the point lies behind camera `k`, in which
/// case the output coordinates are left untouched.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_rig_warp(
    rig: *const LfRig,
    u: f64,
    v: f64,
    d: f64,
    k: u32,
    out_u: *mut f64,
    out_v: *mut f64,
    visible: *mut u8,
) -> LfStatus {
    guard(|| {
        let rig = &as_ref(rig, "rig")?.rig;
        let (out_u, out_v, visible) = (as_mut(out_u, "out_u")?, as_mut(out_v, "out_v")?, as_mut(visible, "visible")?);
        let k = k as usize;
        if k >= rig.num_cameras() {
            return Err(invalid(format!("camera {k} out of range (rig has {})", rig.num_cameras())));
        }
        if !(u.is_finite() && v.is_finite() && d.is_finite()) {
            return Err(invalid("warp arguments must be finite".into()));
        }
        match rig.warp(PixelCoord::new(u, v), d, k) {
            Some(p) => {
                *out_u = p.u;
                *out_v = p.v;
                *visible = 1;
            }
            None => *visible = 0,
        }
        Ok(())
    })
}

/// Creates an empty frame for `rig`: black views and all-static priors.
///
/// # Safety
/// `rig` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lf_frame_new(rig: *const LfRig, out: *mut *mut LfFrame) -> LfStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let rig = &as_ref(rig, "rig")?.rig;
        let (width, height) = rig.image_dims();
        let k = rig.num_cameras();
        *out = Box::into_raw(Box::new(LfFrame {
            width,
            height,
            views: vec![Plane::new(width, height, [0; 3]); k],
            priors: vec![Plane::new(width, height, 1.0); k],
        }));
        Ok(())
    })
}

/// Copies view `k` from row-major interleaved RGB bytes, `width * height * 3`
/// of them.
///
/// # Safety
/// `frame` must be valid and `rgb` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_frame_set_view(frame: *mut LfFrame, k: u32, rgb: *const u8, len: usize) -> LfStatus {
    guard(|| {
        let frame = as_mut(frame, "frame")?;
        let slot = check_view(frame, k)?;
        let needed = frame.width * frame.height * 3;
        if len != needed {
            return Err(size_mismatch(k, "view", needed, len));
        }
        let data = slice_arg(rgb, len, "rgb")?;
        let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        frame.views[slot] = Plane::from_vec(frame.width, frame.height, pixels);
        Ok(())
    })
}

/// Copies the static-probability prior of view `k`, `width * height` values
/// in `[0, 1]`, row-major.
///
/// # Safety
/// `frame` must be valid and `prior` must point to `len` readable floats.
#[no_mangle]
pub unsafe extern "C" fn lf_frame_set_prior(frame: *mut LfFrame, k: u32, prior: *const f32, len: usize) -> LfStatus {
    guard(|| {
        let frame = as_mut(frame, "frame")?;
        let slot = check_view(frame, k)?;
        let needed = frame.width * frame.height;
        if len != needed {
            return Err(size_mismatch(k, "prior", needed, len));
        }
        let data = slice_arg(prior, len, "prior")?;
        if let Some(i) = data.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(format!("prior {k} value {} at index {i} outside [0, 1]", data[i])));
        }
        frame.priors[slot] = Plane::from_vec(frame.width, frame.height, data.to_vec());
        Ok(())
    })
}

fn check_view(frame: &LfFrame, k: u32) -> Result<usize, Fail> {
    let k = k as usize;
    if k >= frame.views.len() {
        return Err(invalid(format!("view {k} out of range (frame has {})", frame.views.len())));
    }
    Ok(k)
}

fn size_mismatch(k: u32, what: &str, needed: usize, len: usize) -> Fail {
    Fail(
        LfStatus::SizeMismatch,
        format!("{what} {k}: expected {needed} elements, found {len}"),
    )
}

/// Releases a frame. Null is ignored.
///
/// # Safety
/// `frame` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lf_frame_free(frame: *mut LfFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Writes the default parameters to `out`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_params_default(out: *mut LfParams) -> LfStatus {
    guard(|| {
        *as_mut(out, "out")? = LfParams::from(&RunConfig::default());
        Ok(())
    })
}

/// Estimates disparity and the refocused reference view. `params` may be
/// null for defaults.
///
/// # Safety
/// `rig`, `frame` and `out` must be valid; `params` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn lf_reconstruct(
    rig: *const LfRig,
    frame: *const LfFrame,
    params: *const LfParams,
    out: *mut *mut LfResult,
) -> LfStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let rig = &as_ref(rig, "rig")?.rig;
        let frame = as_ref(frame, "frame")?;
        let cfg = match params.as_ref() {
            Some(p) => p.to_config(),
            None => RunConfig::default(),
        };
        let params = cfg.params();
        params.validate()?;
        let lf = LightFieldFrame::new(frame.views.clone())?;
        let priors = SegmentationPriorMaps::new(frame.priors.clone())?;
        let rec = pipeline::with_threads(cfg.threads, || pipeline::reconstruct(rig, &lf, &priors, &params))??;
        *out = Box::into_raw(Box::new(LfResult { rec }));
        Ok(())
    })
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lf_result_free(result: *mut LfResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Width and height of the result maps.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_result_size(result: *const LfResult, width: *mut u32, height: *mut u32) -> LfStatus {
    guard(|| {
        let (w, h) = as_ref(result, "result")?.rec.disparity.dims();
        *as_mut(width, "width")? = w as u32;
        *as_mut(height, "height")? = h as u32;
        Ok(())
    })
}

/// Copies the reference-view disparity, row-major, into `out`; `len` must
/// be at least `width * height`.
///
/// # Safety
/// `result` must be valid and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_result_disparity(result: *const LfResult, out: *mut f64, len: usize) -> LfStatus {
    guard(|| {
        let d = &as_ref(result, "result")?.rec.disparity.disparity;
        out_slice(out, len, d.as_slice().len(), "out")?.copy_from_slice(d.as_slice());
        Ok(())
    })
}

/// Copies the refocused reference view as interleaved RGB; `len` must be at
/// least `width * height * 3`.
///
/// # Safety
/// `result` must be valid and `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_result_refocused(result: *const LfResult, out: *mut u8, len: usize) -> LfStatus {
    guard(|| {
        let img = as_ref(result, "result")?.rec.refocused.color.as_slice();
        let dst = out_slice(out, len, img.len() * 3, "out")?;
        for (d, s) in dst.chunks_exact_mut(3).zip(img) {
            d.copy_from_slice(s);
        }
        Ok(())
    })
}

/// Copies the provenance codes (0 invalid, 128 fallback, 255 refocused or
/// copied); `len` must be at least `width * height`.
///
/// # Safety
/// `result` must be valid and `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_result_provenance(result: *const LfResult, out: *mut u8, len: usize) -> LfStatus {
    guard(|| {
        let codes = as_ref(result, "result")?.rec.refocused.provenance_map();
        out_slice(out, len, codes.as_slice().len(), "out")?.copy_from_slice(codes.as_slice());
        Ok(())
    })
}

/// Copies the per-pixel ray masks, `valid << 8 | static`, where bit `k` of
/// each byte refers to camera `k`; `len` must be at least `width * height`.
///
/// # Safety
/// `result` must be valid and `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn lf_result_ray_masks(result: *const LfResult, out: *mut u16, len: usize) -> LfStatus {
    guard(|| {
        let seg = &as_ref(result, "result")?.rec.segmentation;
        let (s, v) = (seg.static_mask.as_slice(), seg.valid_mask.as_slice());
        let dst = out_slice(out, len, s.len(), "out")?;
        for ((d, &s), &v) in dst.iter_mut().zip(s).zip(v) {
            *d = (v as u16) << 8 | s as u16;
        }
        Ok(())
    })
}

/// EM iterations run and whether the loop converged (1) or hit the
/// iteration cap (0).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_result_iterations(result: *const LfResult, iterations: *mut u32, converged: *mut u8) -> LfStatus {
    guard(|| {
        let r = &as_ref(result, "result")?.rec.report;
        *as_mut(iterations, "iterations")? = r.iterations as u32;
        *as_mut(converged, "converged")? = r.converged as u8;
        Ok(())
    })
}

/// Number of support points found.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_result_support_count(result: *const LfResult, out: *mut u32) -> LfStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(result, "result")?.rec.support.len() as u32;
        Ok(())
    })
}

/// Total wall-clock seconds spent in the reconstruction.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lf_result_seconds(result: *const LfResult, out: *mut f64) -> LfStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(result, "result")?.rec.timings.total();
        Ok(())
    })
}
