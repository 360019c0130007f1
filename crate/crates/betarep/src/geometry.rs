//! Axis-aligned box geometry shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates: `[l, t, r, b]` with `r > l` and
/// `b > t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub l: f64,
    pub t: f64,
    pub r: f64,
    pub b: f64,
}

impl BBox {
    pub fn new(l: f64, t: f64, r: f64, b: f64) -> Result<Self> {
        if ![l, t, r, b].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "non-finite box [{l}, {t}, {r}, {b}]"
            )));
        }
        if r <= l || b <= t {
            return Err(Error::InvalidGeometry(format!(
                "box [{l}, {t}, {r}, {b}] has non-positive width or height"
            )));
        }
        Ok(Self { l, t, r, b })
    }

    /// Corner-form constructor from `[x, y, w, h]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.r - self.l
    }

    pub fn height(&self) -> f64 {
        self.b - self.t
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.l + self.r) / 2.0, (self.t + self.b) / 2.0)
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.l <= other.l && self.t <= other.t && self.r >= other.r && self.b >= other.b
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.l && x <= self.r && y >= self.t && y <= self.b
    }

    /// Positive-area intersection test. Boxes that merely touch along an
    /// edge do not overlap.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.l < other.r && other.l < self.r && self.t < other.b && other.t < self.b
    }

    /// Intersection area (0 when disjoint).
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.r.min(other.r) - self.l.max(other.l)).max(0.0);
        let h = (self.b.min(other.b) - self.t.max(other.t)).max(0.0);
        w * h
    }

    /// Smallest box enclosing both.
    pub fn union_bounds(&self, other: &BBox) -> BBox {
        BBox {
            l: self.l.min(other.l),
            t: self.t.min(other.t),
            r: self.r.max(other.r),
            b: self.b.max(other.b),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            l: self.l + dx,
            t: self.t + dy,
            r: self.r + dx,
            b: self.b + dy,
        }
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, s: f64) -> BBox {
        BBox {
            l: self.l * s,
            t: self.t * s,
            r: self.r * s,
            b: self.b * s,
        }
    }
}

/// A pedestrian's full-body box paired with its visible box.
///
/// The visible box is clipped into the full box at construction; an empty
/// intersection is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBoxes {
    full: BBox,
    visible: BBox,
}

impl PairedBoxes {
    pub fn new(full: BBox, visible: BBox) -> Result<Self> {
        let clipped = BBox::new(
            visible.l.max(full.l),
            visible.t.max(full.t),
            visible.r.min(full.r),
            visible.b.min(full.b),
        )
        .map_err(|_| {
            Error::InvalidGeometry(format!(
                "visible box [{}, {}, {}, {}] does not intersect full box [{}, {}, {}, {}]",
                visible.l, visible.t, visible.r, visible.b, full.l, full.t, full.r, full.b
            ))
        })?;
        Ok(Self {
            full,
            visible: clipped,
        })
    }

    /// A fully visible pedestrian (visible == full).
    pub fn fully_visible(full: BBox) -> Self {
        Self {
            full,
            visible: full,
        }
    }

    pub fn full(&self) -> &BBox {
        &self.full
    }

    pub fn visible(&self) -> &BBox {
        &self.visible
    }
}
