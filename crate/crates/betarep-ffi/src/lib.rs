//! C ABI for the betarep toolkit.
//!
//! The surface is handle-based: create a [`BetarepContext`] carrying the
//! weight, grid, and NMS constants, then call the pure functions against it.
//! Every fallible call returns a [`BetarepStatus`]; the accompanying message
//! is retrievable per thread via [`betarep_last_error`]. Pedestrians cross
//! the boundary as flat `[l, t, r, b, alpha_x, beta_x, alpha_y, beta_y]`
//! arrays, boxes as `[l, t, r, b]`.
//!
//! Safety contract shared by every pointer-taking function: pointers must
//! either be null (reported as `NullArgument`) or valid, aligned, and sized
//! per the parameter documentation, and output buffers must have the
//! documented capacity. Contexts must come from the constructors here and
//! must not be freed twice.
//!
//! The build script emits `include/betarep.h` via cbindgen.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use betarep::{
    beta_pdf_2d, beta_to_visible_box, boxes_to_beta, render_mask, run_nms, sym_kl, BBox,
    BetaPedestrian, Detection, Error, GridSpec, NmsConfig, PairedBoxes, Strategy, WeightConfig,
};

/// Call outcome. Anything other than `Ok` leaves a message in
/// `betarep_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetarepStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidGeometry = 2,
    InfeasibleMoments = 3,
    DomainError = 4,
    InvalidConfig = 5,
    GridError = 6,
    InternalError = 7,
}

/// Suppression strategy selector for `betarep_nms`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetarepStrategy {
    Fiou = 0,
    Viou = 1,
    FiouViou = 2,
    Soft = 3,
    Beta = 4,
}

/// Opaque toolkit configuration handle.
pub struct BetarepContext {
    weights: WeightConfig,
    grid: GridSpec,
    nms: NmsConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> BetarepStatus {
    match err {
        Error::InvalidGeometry(_) => BetarepStatus::InvalidGeometry,
        Error::InfeasibleMoments { .. } => BetarepStatus::InfeasibleMoments,
        Error::Domain(_) | Error::UndefinedMetric(_) => BetarepStatus::DomainError,
        Error::InvalidConfig(_) => BetarepStatus::InvalidConfig,
        Error::GridMismatch(_) | Error::Coverage(_) => BetarepStatus::GridError,
        _ => BetarepStatus::InternalError,
    }
}

/// Run a fallible body behind a panic guard, translating errors into status
/// codes and recording their messages.
fn guarded<F: FnOnce() -> Result<(), (BetarepStatus, String)>>(f: F) -> BetarepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BetarepStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BetarepStatus::InternalError
        }
    }
}

fn lib_err(e: Error) -> (BetarepStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (BetarepStatus, String) {
    (BetarepStatus::NullArgument, format!("{what} is null"))
}

unsafe fn parse_box(raw: &[f64; 4]) -> Result<BBox, (BetarepStatus, String)> {
    BBox::new(raw[0], raw[1], raw[2], raw[3]).map_err(lib_err)
}

unsafe fn parse_pedestrian(raw: &[f64; 8]) -> Result<BetaPedestrian, (BetarepStatus, String)> {
    BetaPedestrian::from_flat(*raw).map_err(lib_err)
}

/// Message for the most recent failing call on this thread, or null when the
/// last call succeeded. The pointer stays valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn betarep_last_error() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.as_ptr(),
        None => std::ptr::null(),
    })
}

/// New context with the default constants (weights 1/0.04, rho = sqrt(12),
/// lambda = rho/4, grid 128 cells, NMS thresholds 0.5/0.35/7).
#[no_mangle]
pub extern "C" fn betarep_context_new() -> *mut BetarepContext {
    Box::into_raw(Box::new(BetarepContext {
        weights: WeightConfig::default(),
        grid: GridSpec::default(),
        nms: NmsConfig::default(),
    }))
}

/// New context with explicit constants; returns null (with a recorded error)
/// when any value violates its invariant.
#[no_mangle]
pub extern "C" fn betarep_context_with_params(
    w_visible: f64,
    w_full: f64,
    rho: f64,
    lambda: f64,
    grid_resolution: usize,
    epsilon_floor: f64,
) -> *mut BetarepContext {
    let weights = WeightConfig {
        w_visible,
        w_full,
        rho,
        lambda,
    };
    let grid = GridSpec {
        resolution: grid_resolution,
        epsilon_floor,
    };
    if let Err(e) = weights.validate().and_then(|()| grid.validate()) {
        set_error(e.to_string());
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(BetarepContext {
        weights,
        grid,
        nms: NmsConfig {
            grid,
            weights,
            ..NmsConfig::default()
        },
    }))
}

/// Override the NMS thresholds carried by the context.
#[no_mangle]
pub unsafe extern "C" fn betarep_context_set_nms_thresholds(
    ctx: *mut BetarepContext,
    iou_threshold: f64,
    viou_threshold: f64,
    kl_threshold: f64,
) -> BetarepStatus {
    guarded(|| {
        let ctx = unsafe { ctx.as_mut() }.ok_or_else(|| null_err("ctx"))?;
        let candidate = NmsConfig {
            iou_threshold,
            viou_threshold,
            kl_threshold,
            ..ctx.nms.clone()
        };
        candidate.validate().map_err(lib_err)?;
        ctx.nms = candidate;
        Ok(())
    })
}

/// Destroy a context created by one of the constructors. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn betarep_context_free(ctx: *mut BetarepContext) {
    if !ctx.is_null() {
        drop(unsafe { Box::from_raw(ctx) });
    }
}

/// Transform a full/visible box pair into the eight-parameter
/// representation. `out_beta` receives `[l, t, r, b, ax, bx, ay, by]`.
#[no_mangle]
pub unsafe extern "C" fn betarep_boxes_to_beta(
    ctx: *const BetarepContext,
    full: *const [f64; 4],
    visible: *const [f64; 4],
    out_beta: *mut [f64; 8],
) -> BetarepStatus {
    guarded(|| {
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let full = unsafe { full.as_ref() }.ok_or_else(|| null_err("full"))?;
        let visible = unsafe { visible.as_ref() }.ok_or_else(|| null_err("visible"))?;
        let out = unsafe { out_beta.as_mut() }.ok_or_else(|| null_err("out_beta"))?;
        let paired = PairedBoxes::new(unsafe { parse_box(full) }?, unsafe { parse_box(visible) }?)
            .map_err(lib_err)?;
        let bp = boxes_to_beta(&paired, &ctx.weights).map_err(lib_err)?;
        *out = bp.to_flat();
        Ok(())
    })
}

/// Approximate the visible box of a pedestrian; `out_box` receives
/// `[l, t, r, b]`.
#[no_mangle]
pub unsafe extern "C" fn betarep_visible_box(
    ctx: *const BetarepContext,
    beta: *const [f64; 8],
    out_box: *mut [f64; 4],
) -> BetarepStatus {
    guarded(|| {
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let beta = unsafe { beta.as_ref() }.ok_or_else(|| null_err("beta"))?;
        let out = unsafe { out_box.as_mut() }.ok_or_else(|| null_err("out_box"))?;
        let bp = unsafe { parse_pedestrian(beta) }?;
        let vis = beta_to_visible_box(&bp, &ctx.weights).map_err(lib_err)?;
        *out = [vis.l, vis.t, vis.r, vis.b];
        Ok(())
    })
}

/// 2D beta density of a pedestrian at pixel `(x, y)`.
#[no_mangle]
pub unsafe extern "C" fn betarep_pdf(
    ctx: *const BetarepContext,
    beta: *const [f64; 8],
    x: f64,
    y: f64,
    out_density: *mut f64,
) -> BetarepStatus {
    guarded(|| {
        let _ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let beta = unsafe { beta.as_ref() }.ok_or_else(|| null_err("beta"))?;
        let out = unsafe { out_density.as_mut() }.ok_or_else(|| null_err("out_density"))?;
        let bp = unsafe { parse_pedestrian(beta) }?;
        *out = beta_pdf_2d(x, y, &bp);
        Ok(())
    })
}

/// Symmetrized KL divergence in nats between two pedestrians, on the
/// context's grid.
#[no_mangle]
pub unsafe extern "C" fn betarep_sym_kl(
    ctx: *const BetarepContext,
    a: *const [f64; 8],
    b: *const [f64; 8],
    out_nats: *mut f64,
) -> BetarepStatus {
    guarded(|| {
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let a = unsafe { a.as_ref() }.ok_or_else(|| null_err("a"))?;
        let b = unsafe { b.as_ref() }.ok_or_else(|| null_err("b"))?;
        let out = unsafe { out_nats.as_mut() }.ok_or_else(|| null_err("out_nats"))?;
        let pa = unsafe { parse_pedestrian(a) }?;
        let pb = unsafe { parse_pedestrian(b) }?;
        *out = sym_kl(&pa, &pb, &ctx.grid).map_err(lib_err)?;
        Ok(())
    })
}

/// Greedy NMS over `count` detections supplied as a row-major
/// `count x 8` parameter block plus a score array.
///
/// Kept detections are reported as indices into the input, written to
/// `out_indices` (capacity `count`); `out_kept` receives how many were
/// written. For the soft strategy the surviving indices are ordered by
/// decayed score; rescored values are not returned through this interface.
#[no_mangle]
pub unsafe extern "C" fn betarep_nms(
    ctx: *const BetarepContext,
    betas: *const f64,
    scores: *const f64,
    count: usize,
    strategy: BetarepStrategy,
    out_indices: *mut usize,
    out_kept: *mut usize,
) -> BetarepStatus {
    guarded(|| {
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let out_kept = unsafe { out_kept.as_mut() }.ok_or_else(|| null_err("out_kept"))?;
        if count == 0 {
            *out_kept = 0;
            return Ok(());
        }
        if betas.is_null() || scores.is_null() || out_indices.is_null() {
            return Err(null_err("betas/scores/out_indices"));
        }
        let betas = unsafe { std::slice::from_raw_parts(betas, count * 8) };
        let scores = unsafe { std::slice::from_raw_parts(scores, count) };
        let mut dets = Vec::with_capacity(count);
        for i in 0..count {
            let mut flat = [0.0; 8];
            flat.copy_from_slice(&betas[i * 8..(i + 1) * 8]);
            let bp = BetaPedestrian::from_flat(flat).map_err(lib_err)?;
            dets.push(Detection::new(bp, scores[i], i as u64).map_err(lib_err)?);
        }
        let cfg = NmsConfig {
            strategy: match strategy {
                BetarepStrategy::Fiou => Strategy::Fiou,
                BetarepStrategy::Viou => Strategy::Viou,
                BetarepStrategy::FiouViou => Strategy::FiouViou,
                BetarepStrategy::Soft => Strategy::Soft,
                BetarepStrategy::Beta => Strategy::Beta,
            },
            grid: ctx.grid,
            weights: ctx.weights,
            ..ctx.nms.clone()
        };
        let kept = run_nms(&dets, &cfg).map_err(lib_err)?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_indices, count) };
        for (slot, d) in out.iter_mut().zip(&kept) {
            *slot = d.id as usize;
        }
        *out_kept = kept.len();
        Ok(())
    })
}

/// Render the pedestrian's beta mask onto a `height x width` grid spanning
/// its boundary; `out_values` (capacity `height * width`) receives row-major
/// masses summing to 1.
#[no_mangle]
pub unsafe extern "C" fn betarep_render_mask(
    ctx: *const BetarepContext,
    beta: *const [f64; 8],
    height: usize,
    width: usize,
    out_values: *mut f64,
) -> BetarepStatus {
    guarded(|| {
        let _ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_err("ctx"))?;
        let beta = unsafe { beta.as_ref() }.ok_or_else(|| null_err("beta"))?;
        if out_values.is_null() {
            return Err(null_err("out_values"));
        }
        let bp = unsafe { parse_pedestrian(beta) }?;
        let mask = render_mask(&bp, height, width).map_err(lib_err)?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_values, height * width) };
        out.copy_from_slice(mask.values());
        Ok(())
    })
}
