//! Surrogate detector: fixed anchors scored by a centre-surround contrast template.
//!
//! For an anchor with inner rectangle `A` and a ring `R` that grows `A` by a quarter of
//! its size on every side, the template response is `mean(A) - mean(R)` on a luminance
//! raster and the score is `sigmoid(alpha * (response - bias))`. Responses are linear in
//! the pixels, so exact gradients come from the same rectangles used for the forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::tracker::Detection;

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub stride: usize,
    /// Anchor `(width, height)` pairs; both must be multiples of 4.
    pub sizes: Vec<(usize, usize)>,
    pub alpha: f64,
    pub bias: f64,
    pub score_threshold: f64,
    pub nms_iou: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            stride: 8,
            sizes: vec![(32, 64), (40, 80), (48, 96)],
            alpha: 20.0,
            bias: 0.45,
            score_threshold: 0.5,
            nms_iou: 0.45,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.stride == 0 {
            return bad("detector stride must be positive".into());
        }
        if self.sizes.is_empty() {
            return bad("detector needs at least one anchor size".into());
        }
        if let Some(s) = self
            .sizes
            .iter()
            .find(|(w, h)| *w == 0 || *h == 0 || w % 4 != 0 || h % 4 != 0)
        {
            return bad(format!("anchor size {s:?} must be positive multiples of 4"));
        }
        if !(self.alpha > 0.0) || !self.bias.is_finite() {
            return bad("alpha must be positive and bias finite".into());
        }
        if !(0.0..=1.0).contains(&self.score_threshold) || !(0.0..=1.0).contains(&self.nms_iou) {
            return bad("score_threshold and nms_iou must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixRect {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn to_bbox(&self) -> BBox {
        BBox::from_corners(self.x0 as f64, self.y0 as f64, self.x1 as f64, self.y1 as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub inner: PixRect,
    /// Ring outer edge, clipped to the raster.
    pub outer: PixRect,
}

impl Anchor {
    pub fn bbox(&self) -> BBox {
        self.inner.to_bbox()
    }

    pub fn center(&self) -> (f64, f64) {
        self.bbox().center()
    }

    fn ring_area(&self) -> f64 {
        (self.outer.area() - self.inner.area()) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateDetector {
    cfg: DetectorConfig,
    width: usize,
    height: usize,
    anchors: Vec<Anchor>,
}

/// Summed-area table with one row and column of zero padding.
struct Integral {
    stride: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(r: &Raster) -> Self {
        let stride = r.width + 1;
        let mut sums = vec![0.0; stride * (r.height + 1)];
        for y in 0..r.height {
            let mut row = 0.0;
            for x in 0..r.width {
                row += r.data[y * r.width + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    fn sum(&self, q: &PixRect) -> f64 {
        let s = |x: usize, y: usize| self.sums[y * self.stride + x];
        s(q.x1, q.y1) - s(q.x0, q.y1) - s(q.x1, q.y0) + s(q.x0, q.y0)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SurrogateDetector {
    /// Anchors centred on every multiple of the stride whose inner box fits the raster.
    pub fn new(cfg: DetectorConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        let mut anchors = Vec::new();
        for &(aw, ah) in &cfg.sizes {
            let (mx, my) = (aw / 4, ah / 4);
            let centres = |half: usize, limit: usize| {
                (0..=limit / cfg.stride)
                    .map(|k| k * cfg.stride)
                    .filter(move |&c| c >= half && c + half <= limit)
            };
            for cy in centres(ah / 2, height) {
                for cx in centres(aw / 2, width) {
                    let (x0, y0) = (cx - aw / 2, cy - ah / 2);
                    let inner = PixRect {
                        x0,
                        y0,
                        x1: x0 + aw,
                        y1: y0 + ah,
                    };
                    let outer = PixRect {
                        x0: x0.saturating_sub(mx),
                        y0: y0.saturating_sub(my),
                        x1: (inner.x1 + mx).min(width),
                        y1: (inner.y1 + my).min(height),
                    };
                    // A ring clipped away entirely leaves nothing to contrast against.
                    if outer.area() > inner.area() {
                        anchors.push(Anchor { inner, outer });
                    }
                }
            }
        }
        if anchors.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "no anchor fits a {width}x{height} raster"
            )));
        }
        Ok(Self {
            cfg,
            width,
            height,
            anchors,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    fn check(&self, r: &Raster) {
        assert_eq!(
            (r.width, r.height),
            (self.width, self.height),
            "raster size differs from detector"
        );
    }

    pub fn responses(&self, r: &Raster) -> Vec<f64> {
        self.check(r);
        let ii = Integral::new(r);
        self.anchors
            .iter()
            .map(|a| {
                let inner = ii.sum(&a.inner);
                let ring = ii.sum(&a.outer) - inner;
                inner / a.inner.area() as f64 - ring / a.ring_area()
            })
            .collect()
    }

    /// Pre-suppression score of every anchor.
    pub fn scores(&self, r: &Raster) -> Vec<f64> {
        self.responses(r)
            .into_iter()
            .map(|c| sigmoid(self.cfg.alpha * (c - self.cfg.bias)))
            .collect()
    }

    /// Anchors scoring at least the threshold, after greedy suppression.
    pub fn detect(&self, r: &Raster) -> Vec<Detection> {
        let scores = self.scores(r);
        let candidates: Vec<(BBox, f64)> = self
            .anchors
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s >= self.cfg.score_threshold)
            .map(|(a, &s)| (a.bbox(), s))
            .collect();
        nms(&candidates, self.cfg.nms_iou)
            .into_iter()
            .map(|i| Detection::new(candidates[i].0, candidates[i].1, 1))
            .collect()
    }

    /// Raster gradient of a loss given its gradient with respect to every anchor score.
    pub fn backward(&self, scores: &[f64], grad_scores: &[f64]) -> Vec<f64> {
        assert_eq!(scores.len(), self.anchors.len());
        assert_eq!(grad_scores.len(), self.anchors.len());
        // Rectangle updates go into a 2-D difference array, integrated once at the end.
        let w = self.width + 1;
        let mut diff = vec![0.0; w * (self.height + 1)];
        let mut add = |q: &PixRect, v: f64| {
            diff[q.y0 * w + q.x0] += v;
            diff[q.y0 * w + q.x1] -= v;
            diff[q.y1 * w + q.x0] -= v;
            diff[q.y1 * w + q.x1] += v;
        };
        for ((a, &s), &g) in self.anchors.iter().zip(scores).zip(grad_scores) {
            if g == 0.0 {
                continue;
            }
            let dc = g * self.cfg.alpha * s * (1.0 - s);
            let ring = a.ring_area();
            add(&a.inner, dc * (1.0 / a.inner.area() as f64 + 1.0 / ring));
            add(&a.outer, -dc / ring);
        }
        let mut out = vec![0.0; self.width * self.height];
        let mut acc = vec![0.0; w];
        for y in 0..self.height {
            let mut run = 0.0;
            for x in 0..self.width {
                run += diff[y * w + x];
                acc[x] += run;
                out[y * self.width + x] = acc[x];
            }
        }
        out
    }
}

/// Greedy non-maximum suppression; returns kept indices, best score first. Ties keep
/// the earlier index.
pub fn nms(candidates: &[(BBox, f64)], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].1.total_cmp(&candidates[a].1).then(a.cmp(&b)));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep
            .iter()
            .all(|&k| iou(&candidates[k].0, &candidates[i].0) <= iou_threshold)
        {
            keep.push(i);
        }
    }
    keep
}
