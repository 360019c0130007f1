//! Regression-target codec and mask math for detector heads.
//!
//! Shape parameters are too abstract to regress directly, so the targets are
//! the pixel-space mean and deviation plus the boundary box, all normalized
//! against an anchor: offsets divide by the anchor size and sizes go through
//! a log ratio. The mask side renders the 2D beta distribution onto a small
//! boundary-relative grid and scores predictions with a KL loss against the
//! ground-truth mask.

use serde::{Deserialize, Serialize};

use crate::beta::{pdf01, BetaPedestrian};
use crate::error::{Error, Result};
use crate::geometry::BBox;

const MASK_EPS: f64 = 1e-12;

/// Anchor box as center plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Anchor {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "anchor must have positive finite size (got x={x}, y={y}, w={w}, h={h})"
            )));
        }
        Ok(Self { x, y, w, h })
    }
}

/// Ground-truth regression targets: boundary box plus pixel-space moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTargets {
    pub boundary: BBox,
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl BetaTargets {
    pub fn new(boundary: BBox, mu_x: f64, mu_y: f64, sigma_x: f64, sigma_y: f64) -> Result<Self> {
        if !(sigma_x > 0.0 && sigma_y > 0.0) {
            return Err(Error::Domain(format!(
                "target deviations must be positive (got {sigma_x}, {sigma_y})"
            )));
        }
        Ok(Self {
            boundary,
            mu_x,
            mu_y,
            sigma_x,
            sigma_y,
        })
    }
}

/// The eight normalized regression values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaVec {
    pub d_cx: f64,
    pub d_cy: f64,
    pub d_logw: f64,
    pub d_logh: f64,
    pub t_mux: f64,
    pub t_muy: f64,
    pub t_logsx: f64,
    pub t_logsy: f64,
}

impl DeltaVec {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.d_cx, self.d_cy, self.d_logw, self.d_logh, self.t_mux, self.t_muy,
            self.t_logsx, self.t_logsy,
        ]
    }
}

/// Normalized nonnegative mask over a boundary-relative grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl MaskGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Row-major values, `values[row * width + col]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Encode ground-truth targets against an anchor:
/// `t_mu = (mu - anchor_center) / anchor_size`,
/// `t_logs = ln(sigma / anchor_size)`, and the usual center/size deltas for
/// the boundary.
pub fn encode_targets(gt: &BetaTargets, a: &Anchor) -> Result<DeltaVec> {
    if !(gt.sigma_x > 0.0 && gt.sigma_y > 0.0) {
        return Err(Error::Domain(format!(
            "cannot encode nonpositive deviations ({}, {})",
            gt.sigma_x, gt.sigma_y
        )));
    }
    let (cx, cy) = gt.boundary.center();
    Ok(DeltaVec {
        d_cx: (cx - a.x) / a.w,
        d_cy: (cy - a.y) / a.h,
        d_logw: (gt.boundary.width() / a.w).ln(),
        d_logh: (gt.boundary.height() / a.h).ln(),
        t_mux: (gt.mu_x - a.x) / a.w,
        t_muy: (gt.mu_y - a.y) / a.h,
        t_logsx: (gt.sigma_x / a.w).ln(),
        t_logsy: (gt.sigma_y / a.h).ln(),
    })
}

/// Exact algebraic inverse of [`encode_targets`].
pub fn decode_targets(d: &DeltaVec, a: &Anchor) -> Result<BetaTargets> {
    if d.to_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite delta vector".into()));
    }
    let cx = a.x + d.d_cx * a.w;
    let cy = a.y + d.d_cy * a.h;
    let w = a.w * d.d_logw.exp();
    let h = a.h * d.d_logh.exp();
    let boundary = BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)?;
    BetaTargets::new(
        boundary,
        a.x + d.t_mux * a.w,
        a.y + d.t_muy * a.h,
        a.w * d.t_logsx.exp(),
        a.h * d.t_logsy.exp(),
    )
}

/// Sample the pedestrian's 2D beta density at the cell centers of an
/// `h x w` grid spanning its boundary and normalize the result to sum 1.
pub fn render_mask(bp: &BetaPedestrian, h: usize, w: usize) -> Result<MaskGrid> {
    if h == 0 || w == 0 {
        return Err(Error::Domain(format!(
            "mask grid must be at least 1x1 (got {h}x{w})"
        )));
    }
    // Cell centers in normalized coordinates are strictly interior, so the
    // density is finite and positive for valid shape parameters.
    let col_density: Vec<f64> = (0..w)
        .map(|i| pdf01((i as f64 + 0.5) / w as f64, &bp.x))
        .collect();
    let row_density: Vec<f64> = (0..h)
        .map(|j| pdf01((j as f64 + 0.5) / h as f64, &bp.y))
        .collect();
    let mut values = vec![0.0; h * w];
    let mut sum = 0.0;
    for (j, row) in row_density.iter().enumerate() {
        for (i, col) in col_density.iter().enumerate() {
            let v = col * row;
            values[j * w + i] = v;
            sum += v;
        }
    }
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Domain(format!(
            "mask density degenerate (sum {sum})"
        )));
    }
    for v in &mut values {
        *v /= sum;
    }
    Ok(MaskGrid {
        height: h,
        width: w,
        values,
    })
}

/// KL loss from the ground-truth mask to the predicted mask,
/// `sum truth (ln truth - ln predicted)`, with both grids floored at a tiny
/// epsilon and renormalized so the loss is finite and nonnegative.
pub fn mask_kl_loss(predicted: &MaskGrid, truth: &MaskGrid) -> Result<f64> {
    if predicted.shape() != truth.shape() {
        return Err(Error::GridMismatch(format!(
            "mask shapes differ: {:?} vs {:?}",
            predicted.shape(),
            truth.shape()
        )));
    }
    let floor_norm = |g: &MaskGrid| {
        let mut v: Vec<f64> = g.values.iter().map(|&x| x.max(MASK_EPS)).collect();
        let sum: f64 = v.iter().sum();
        for x in &mut v {
            *x /= sum;
        }
        v
    };
    let p = floor_norm(predicted);
    let t = floor_norm(truth);
    let mut kl = 0.0;
    for (tv, pv) in t.iter().zip(&p) {
        kl += tv * (tv.ln() - pv.ln());
    }
    // Gibbs' inequality guarantees nonnegativity; clip float dust.
    Ok(kl.max(0.0))
}

/// Smooth L1 with the conventional transition point 1:
/// `0.5 x^2` for `|x| < 1`, else `|x| - 0.5`.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Smooth L1 summed over the eight components of a delta pair.
pub fn delta_loss(predicted: &DeltaVec, truth: &DeltaVec) -> f64 {
    predicted
        .to_array()
        .iter()
        .zip(truth.to_array())
        .map(|(p, t)| smooth_l1(p - t))
        .sum()
}
