//! Adversarial losses: box regression, total variation and average score.

use serde::{Deserialize, Serialize};

use super::patch::{Patch, CHANNELS};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, FrameDims};

/// Smoothing added under the square root of the total-variation term.
pub const TV_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 2.5,
            delta: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.beta, self.gamma, self.delta]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "loss weights must be non-negative (got {self:?})"
            )))
        }
    }
}

/// Box-size penalty plus mean IoU shortfall between patch boxes and their targets:
/// `mean(w/W + h/H) + 1 - mean(IoU)`.
pub fn loss_bbr(patch_boxes: &[BBox], target_boxes: &[BBox], dims: &FrameDims) -> Result<f64> {
    check_pairs(patch_boxes, target_boxes)?;
    let n = patch_boxes.len() as f64;
    let size: f64 = patch_boxes.iter().map(|p| p.w / dims.width + p.h / dims.height).sum();
    let overlap: f64 = patch_boxes.iter().zip(target_boxes).map(|(p, t)| iou(p, t)).sum();
    Ok(size / n + 1.0 - overlap / n)
}

fn check_pairs(patch_boxes: &[BBox], target_boxes: &[BBox]) -> Result<()> {
    if patch_boxes.is_empty() {
        return Err(Error::EmptyInput("loss_bbr"));
    }
    if patch_boxes.len() != target_boxes.len() {
        return Err(Error::LengthMismatch(format!(
            "{} patch boxes vs {} target boxes",
            patch_boxes.len(),
            target_boxes.len()
        )));
    }
    Ok(())
}

/// Gradient of `loss_bbr` with respect to each patch box's corners `(x1, y1, x2, y2)`.
/// At kinks of the overlap (coincident edges) the zero one-sided derivative is taken.
pub fn loss_bbr_grad(patch_boxes: &[BBox], target_boxes: &[BBox], dims: &FrameDims) -> Result<(f64, Vec<[f64; 4]>)> {
    let value = loss_bbr(patch_boxes, target_boxes, dims)?;
    let n = patch_boxes.len() as f64;
    let grads = patch_boxes
        .iter()
        .zip(target_boxes)
        .map(|(p, t)| {
            let mut g = [
                -1.0 / dims.width,
                -1.0 / dims.height,
                1.0 / dims.width,
                1.0 / dims.height,
            ];
            let d_iou = iou_corner_grad(p, t);
            for k in 0..4 {
                g[k] = (g[k] - d_iou[k]) / n;
            }
            g
        })
        .collect();
    Ok((value, grads))
}

/// Derivative of `iou(p, t)` with respect to `p`'s corners.
pub fn iou_corner_grad(p: &BBox, t: &BBox) -> [f64; 4] {
    let (px1, py1, px2, py2) = (p.x, p.y, p.right(), p.bottom());
    let (tx1, ty1, tx2, ty2) = (t.x, t.y, t.right(), t.bottom());
    let iw = px2.min(tx2) - px1.max(tx1);
    let ih = py2.min(ty2) - py1.max(ty1);
    let area_p = p.w * p.h;
    if iw <= 0.0 || ih <= 0.0 {
        return [0.0; 4];
    }
    let inter = iw * ih;
    let union = area_p + t.w * t.h - inter;
    if union <= 0.0 {
        return [0.0; 4];
    }
    let d_inter = [
        if px1 > tx1 { -ih } else { 0.0 },
        if py1 > ty1 { -iw } else { 0.0 },
        if px2 < tx2 { ih } else { 0.0 },
        if py2 < ty2 { iw } else { 0.0 },
    ];
    let d_area = [-p.h, -p.w, p.h, p.w];
    let mut g = [0.0; 4];
    for k in 0..4 {
        // d(I/U) with U = Ap + At - I.
        g[k] = (d_inter[k] * (union + inter) - inter * d_area[k]) / (union * union);
    }
    g
}

/// Sum over pixels and channels of `sqrt(dx^2 + dy^2 + eps)`, where `dx`/`dy` are the
/// differences to the right and lower neighbours (zero where the neighbour is missing).
pub fn loss_tv(p: &Patch) -> Result<f64> {
    Ok(loss_tv_grad_inner(p, false)?.0)
}

pub fn loss_tv_grad(p: &Patch) -> Result<(f64, Vec<f64>)> {
    let (v, g) = loss_tv_grad_inner(p, true)?;
    Ok((v, g.unwrap_or_default()))
}

fn loss_tv_grad_inner(p: &Patch, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    if p.height < 2 || p.width < 2 {
        return Err(Error::DegeneratePatch {
            width: p.width,
            height: p.height,
        });
    }
    let mut total = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; p.len()]);
    for row in 0..p.height {
        for col in 0..p.width {
            for c in 0..CHANNELS {
                let here = p.get(row, col, c);
                let dy = if row + 1 < p.height {
                    here - p.get(row + 1, col, c)
                } else {
                    0.0
                };
                let dx = if col + 1 < p.width {
                    here - p.get(row, col + 1, c)
                } else {
                    0.0
                };
                let norm = (dx * dx + dy * dy + TV_EPS).sqrt();
                total += norm;
                if let Some(g) = grad.as_mut() {
                    g[p.idx(row, col, c)] += (dx + dy) / norm;
                    if row + 1 < p.height {
                        g[p.idx(row + 1, col, c)] -= dy / norm;
                    }
                    if col + 1 < p.width {
                        g[p.idx(row, col + 1, c)] -= dx / norm;
                    }
                }
            }
        }
    }
    Ok((total, grad))
}

/// Mean detection score.
pub fn loss_ap(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("loss_ap"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn loss_total(bbr: f64, tv: f64, ap: f64, w: &LossWeights) -> f64 {
    w.beta * bbr + w.gamma * tv + w.delta * ap
}
