//! Axis-aligned box arithmetic shared by the tracker, the attack layer and the metrics.
//!
//! Boxes are continuous-valued and stored as top-left corner plus width and height.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates (top-left, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Frame size used to normalise box extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDims {
    pub width: f64,
    pub height: f64,
}

impl FrameDims {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame dimensions must be positive (got {width}x{height})"
            )));
        }
        Ok(Self { width, height })
    }
}

/// Center-x, center-y, aspect ratio (w/h), height.
pub type Xyah = [f64; 4];

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(x1, y1, (x2 - x1).max(0.0), (y2 - y1).max(0.0))
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Smallest box containing both.
    pub fn union_hull(&self, other: &BBox) -> Self {
        Self::from_corners(
            self.x.min(other.x),
            self.y.min(other.y),
            self.right().max(other.right()),
            self.bottom().max(other.bottom()),
        )
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn to_xyah(&self) -> Result<Xyah> {
        to_xyah(self)
    }
}

/// Intersection over union. Zero when the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn to_xyah(b: &BBox) -> Result<Xyah> {
    if !(b.h > 0.0) {
        return Err(Error::ZeroHeight(b.h));
    }
    Ok([b.x + 0.5 * b.w, b.y + 0.5 * b.h, b.w / b.h, b.h])
}

pub fn from_xyah(m: &Xyah) -> BBox {
    let [cx, cy, a, h] = *m;
    let w = a * h;
    BBox::new(cx - 0.5 * w, cy - 0.5 * h, w, h)
}

/// Restricts a box to `[0, width] x [0, height]`. Boxes fully outside collapse to zero area.
pub fn clip_to_frame(b: &BBox, d: &FrameDims) -> BBox {
    let x1 = b.x.clamp(0.0, d.width);
    let y1 = b.y.clamp(0.0, d.height);
    let x2 = b.right().clamp(0.0, d.width);
    let y2 = b.bottom().clamp(0.0, d.height);
    BBox::from_corners(x1, y1, x2, y2)
}
