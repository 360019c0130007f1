//! The beta representation: paired boxes to per-axis beta shape parameters
//! and back, plus PDF evaluation.
//!
//! A pedestrian is `[l, t, r, b, alpha_x, beta_x, alpha_y, beta_y]`. The
//! boundary is the full-body box; the shape parameters are fitted per axis
//! from the weighted pixel moments of the full/visible pair: visible pixels
//! weigh `w_visible`, occluded pixels `w_full`. The weight profile is
//! piecewise constant, so the moment integrals have closed polynomial forms
//! and no quadrature is needed outside of tests.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, PairedBoxes};
use crate::special::ln_beta;

/// Shape parameters clamped at or below 1 are raised to this value.
pub const CLAMP_FLOOR: f64 = 1.0 + 1e-6;

static CLAMP_COUNT: AtomicU64 = AtomicU64::new(0);

/// Total number of shape parameters clamped to [`CLAMP_FLOOR`] since process
/// start. Monotonic and thread-safe; per-call flags are available through
/// the `*_flagged` variants.
pub fn clamp_count() -> u64 {
    CLAMP_COUNT.load(Ordering::Relaxed)
}

/// Pixel-weight and normalization constants.
///
/// Defaults: `w_visible = 1`, `w_full = 0.04`, `rho = sqrt(12)`,
/// `lambda = rho / 4`. `rho` converts a standard deviation back into a
/// visible-box size; `lambda` scales the normalized deviation so a fully
/// visible pedestrian maps to `alpha = beta = 1.5`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub w_visible: f64,
    pub w_full: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        let rho = 12.0f64.sqrt();
        Self {
            w_visible: 1.0,
            w_full: 0.04,
            rho,
            lambda: rho / 4.0,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_visible > self.w_full && self.w_full > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weights must satisfy w_visible > w_full > 0 (got {} and {})",
                self.w_visible, self.w_full
            )));
        }
        if !(self.rho > 0.0 && self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rho and lambda must be positive (got {} and {})",
                self.rho, self.lambda
            )));
        }
        Ok(())
    }
}

/// Pixel-space mean and standard deviation along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments1D {
    pub mu: f64,
    pub sigma: f64,
}

/// One-dimensional beta shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams1D {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams1D {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "beta shape parameters must be positive and finite (got {alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Normalized mean `alpha / (alpha + beta)`.
    pub fn mu_bar(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Normalized variance `alpha*beta / ((alpha+beta)^2 (alpha+beta+1))`.
    pub fn sigma_bar_sq(&self) -> f64 {
        let nu = self.alpha + self.beta;
        self.alpha * self.beta / (nu * nu * (nu + 1.0))
    }

    /// Concentration `nu = alpha + beta`.
    pub fn nu(&self) -> f64 {
        self.alpha + self.beta
    }
}

/// The eight-parameter pedestrian: boundary box plus per-axis beta shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPedestrian {
    pub boundary: BBox,
    pub x: BetaParams1D,
    pub y: BetaParams1D,
}

impl BetaPedestrian {
    pub fn new(boundary: BBox, x: BetaParams1D, y: BetaParams1D) -> Self {
        Self { boundary, x, y }
    }

    /// Build from the flat `[l, t, r, b, ax, bx, ay, by]` layout used by the
    /// detection file format.
    pub fn from_flat(v: [f64; 8]) -> Result<Self> {
        Ok(Self {
            boundary: BBox::new(v[0], v[1], v[2], v[3])?,
            x: BetaParams1D::new(v[4], v[5])?,
            y: BetaParams1D::new(v[6], v[7])?,
        })
    }

    pub fn to_flat(&self) -> [f64; 8] {
        [
            self.boundary.l,
            self.boundary.t,
            self.boundary.r,
            self.boundary.b,
            self.x.alpha,
            self.x.beta,
            self.y.alpha,
            self.y.beta,
        ]
    }
}

/// Image axis selector for per-axis operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Whether clamping fired per axis during a paired-box transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampFlags {
    pub x: bool,
    pub y: bool,
}

impl ClampFlags {
    pub fn any(&self) -> bool {
        self.x || self.y
    }
}

/// Weighted mean and standard deviation of the piecewise-constant pixel
/// density over the full-box extent on one axis.
///
/// The density is `w_visible` on the visible interval and `w_full` on the
/// rest of the full interval. Moments are evaluated in closed form in
/// centered normalized coordinates, which makes the result exactly
/// translation- and scale-equivariant and keeps a symmetric visible
/// interval exactly centered.
pub fn weighted_moments(paired: &PairedBoxes, cfg: &WeightConfig, axis: Axis) -> Result<Moments1D> {
    cfg.validate()?;
    let (lo, hi, vlo, vhi) = match axis {
        Axis::X => (
            paired.full().l,
            paired.full().r,
            paired.visible().l,
            paired.visible().r,
        ),
        Axis::Y => (
            paired.full().t,
            paired.full().b,
            paired.visible().t,
            paired.visible().b,
        ),
    };
    let width = hi - lo;
    if width <= 0.0 || width.is_nan() {
        return Err(Error::InvalidGeometry(format!(
            "degenerate extent [{lo}, {hi}]"
        )));
    }
    // Visible interval in centered normalized coordinates v = (x - lo)/width - 1/2.
    let p = (vlo - lo) / width - 0.5;
    let q = (vhi - lo) / width - 0.5;
    let wv = cfg.w_visible;
    let wf = cfg.w_full;

    let z = wf * (p + 0.5) + wv * (q - p) + wf * (0.5 - q);
    // First and second centered moments of the unnormalized density:
    //   int v   = (q - p)(q + p)/2 per segment, wf segments cancel pairwise
    //   int v^2 = (x1^3 - x0^3)/3 per segment
    let m1 = (wv - wf) * (q - p) * (q + p) / 2.0;
    let m2 = (wf * (p * p * p + 0.125) + wv * (q * q * q - p * p * p) + wf * (0.125 - q * q * q))
        / 3.0;
    let mean_c = m1 / z;
    let var = m2 / z - mean_c * mean_c;
    if var <= 0.0 || var.is_nan() {
        return Err(Error::InvalidGeometry(format!(
            "degenerate weighted variance {var}"
        )));
    }
    Ok(Moments1D {
        mu: lo + width * (0.5 + mean_c),
        sigma: width * var.sqrt(),
    })
}

/// Convert pixel-space moments over `[lo, hi]` to beta shape parameters.
///
/// Normalizes `mu_bar = (mu - lo)/(hi - lo)` and
/// `sigma_bar = lambda * sigma / (hi - lo)`, then solves the beta moment
/// identities: `nu = mu_bar (1 - mu_bar) / sigma_bar^2 - 1`,
/// `alpha = mu_bar * nu`, `beta = (1 - mu_bar) * nu`. Parameters at or
/// below 1 are clamped to [`CLAMP_FLOOR`]; the returned flag reports whether
/// that happened and the global [`clamp_count`] is incremented.
pub fn moments_to_beta_flagged(
    m: &Moments1D,
    lo: f64,
    hi: f64,
    cfg: &WeightConfig,
) -> Result<(BetaParams1D, bool)> {
    cfg.validate()?;
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(Error::InvalidGeometry(format!(
            "normalization interval [{lo}, {hi}] is empty"
        )));
    }
    if m.sigma <= 0.0 || m.sigma.is_nan() {
        return Err(Error::Domain(format!(
            "sigma must be positive (got {})",
            m.sigma
        )));
    }
    let width = hi - lo;
    let mu_bar = (m.mu - lo) / width;
    let sigma_bar = cfg.lambda * m.sigma / width;
    let sigma_bar_sq = sigma_bar * sigma_bar;
    let infeasible = mu_bar <= 0.0 || mu_bar >= 1.0 || mu_bar.is_nan();
    if infeasible || sigma_bar_sq >= mu_bar * (1.0 - mu_bar) {
        return Err(Error::InfeasibleMoments {
            mu_bar,
            sigma_bar_sq,
        });
    }
    let nu = mu_bar * (1.0 - mu_bar) / sigma_bar_sq - 1.0;
    if nu <= 0.0 || nu.is_nan() {
        return Err(Error::InfeasibleMoments {
            mu_bar,
            sigma_bar_sq,
        });
    }
    let mut alpha = mu_bar * nu;
    let mut beta = (1.0 - mu_bar) * nu;
    let mut clamped = false;
    if alpha <= 1.0 {
        alpha = CLAMP_FLOOR;
        clamped = true;
    }
    if beta <= 1.0 {
        beta = CLAMP_FLOOR;
        clamped = true;
    }
    if clamped {
        CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
    }
    Ok((BetaParams1D { alpha, beta }, clamped))
}

/// [`moments_to_beta_flagged`] without the clamp flag.
pub fn moments_to_beta(m: &Moments1D, lo: f64, hi: f64, cfg: &WeightConfig) -> Result<BetaParams1D> {
    moments_to_beta_flagged(m, lo, hi, cfg).map(|(p, _)| p)
}

/// Full paired-box transform: weighted moments then beta fit on both axes.
/// Boundary is the full-body box.
pub fn boxes_to_beta_flagged(
    paired: &PairedBoxes,
    cfg: &WeightConfig,
) -> Result<(BetaPedestrian, ClampFlags)> {
    let full = *paired.full();
    let mx = weighted_moments(paired, cfg, Axis::X)?;
    let my = weighted_moments(paired, cfg, Axis::Y)?;
    let (x, cx) = moments_to_beta_flagged(&mx, full.l, full.r, cfg)?;
    let (y, cy) = moments_to_beta_flagged(&my, full.t, full.b, cfg)?;
    Ok((
        BetaPedestrian::new(full, x, y),
        ClampFlags { x: cx, y: cy },
    ))
}

/// [`boxes_to_beta_flagged`] without the clamp flags.
pub fn boxes_to_beta(paired: &PairedBoxes, cfg: &WeightConfig) -> Result<BetaPedestrian> {
    boxes_to_beta_flagged(paired, cfg).map(|(p, _)| p)
}

/// Approximate inverse transform: recover a visible box from the beta shape.
///
/// Per axis the pixel deviation is `sigma = sigma_bar * width / lambda` and
/// the visible size is `rho * sigma`, centered at the de-normalized mean and
/// clipped to the boundary. Not an exact inverse of [`boxes_to_beta`]: the
/// occluded-region weight biases the mean toward the boundary center, and
/// the bias shrinks with `w_full`.
pub fn beta_to_visible_box(bp: &BetaPedestrian, cfg: &WeightConfig) -> Result<BBox> {
    cfg.validate()?;
    let span = |p: &BetaParams1D, lo: f64, hi: f64| {
        let width = hi - lo;
        let sigma = p.sigma_bar_sq().sqrt() * width / cfg.lambda;
        let center = lo + p.mu_bar() * width;
        let half = cfg.rho * sigma / 2.0;
        ((center - half).max(lo), (center + half).min(hi))
    };
    let (l, r) = span(&bp.x, bp.boundary.l, bp.boundary.r);
    let (t, b) = span(&bp.y, bp.boundary.t, bp.boundary.b);
    BBox::new(l, t, r, b)
}

/// Beta density at `x_norm` in `[0, 1]`. Endpoints are evaluated as limits:
/// zero when the local exponent is positive, infinite when negative.
pub fn beta_pdf_1d(x_norm: f64, p: &BetaParams1D) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_norm) || x_norm.is_nan() {
        return Err(Error::Domain(format!(
            "beta pdf argument {x_norm} outside [0, 1]"
        )));
    }
    Ok(pdf01(x_norm, p))
}

/// `beta_pdf_1d` without the domain check; assumes `0 <= x <= 1`.
pub(crate) fn pdf01(x: f64, p: &BetaParams1D) -> f64 {
    // At an endpoint the other factor is 1^(exponent) = 1, so the limit is
    // governed by the local exponent alone.
    let edge = |exp: f64| {
        if exp > 0.0 {
            0.0
        } else if exp == 0.0 {
            (-ln_beta(p.alpha, p.beta)).exp()
        } else {
            f64::INFINITY
        }
    };
    if x == 0.0 {
        return edge(p.alpha - 1.0);
    }
    if x == 1.0 {
        return edge(p.beta - 1.0);
    }
    ((p.alpha - 1.0) * x.ln() + (p.beta - 1.0) * (1.0 - x).ln() - ln_beta(p.alpha, p.beta)).exp()
}

/// Two-dimensional beta density at pixel `(x, y)`: the product of the two
/// per-axis densities scaled by `1 / boundary_area`, zero outside the
/// boundary. The continuous integral over the plane is 1.
pub fn beta_pdf_2d(x: f64, y: f64, bp: &BetaPedestrian) -> f64 {
    let bb = &bp.boundary;
    if !bb.contains_point(x, y) {
        return 0.0;
    }
    let u = (x - bb.l) / bb.width();
    let v = (y - bb.t) / bb.height();
    pdf01(u.clamp(0.0, 1.0), &bp.x) * pdf01(v.clamp(0.0, 1.0), &bp.y) / bb.area()
}
