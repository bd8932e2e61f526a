//! The full adversarial objective on one scene, with its exact gradient.
//!
//! Each patched target gets a "patch box": the score-weighted mean of the anchors whose
//! centres fall inside its patch region, so the box moves smoothly as scores change.
//! The score term averages the emitted anchors (score at or above the detector
//! threshold) that overlap a patched target with IoU >= 0.5, i.e. that target's genuine
//! detections; with none emitted it is zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::detector::{DetectorConfig, SurrogateDetector};
use super::eot::EotTransform;
use super::loss::{iou_corner_grad, loss_ap, loss_bbr, loss_total, loss_tv, loss_tv_grad, LossWeights};
use super::patch::Patch;
use super::render::{render, Scene};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, FrameDims};

/// IoU an anchor needs with a target to count as one of its genuine candidates.
pub const GENUINE_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub bbr: f64,
    pub tv: f64,
    pub ap: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn mean(parts: &[LossBreakdown]) -> LossBreakdown {
        let n = parts.len().max(1) as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| parts.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            bbr: sum(|p| p.bbr),
            tv: sum(|p| p.tv),
            ap: sum(|p| p.ap),
            total: sum(|p| p.total),
        }
    }
}

/// Caches one detector per raster size.
#[derive(Debug, Clone)]
pub struct Objective {
    detector: DetectorConfig,
    weights: LossWeights,
    cache: HashMap<(usize, usize), SurrogateDetector>,
}

struct Roles {
    /// Per patched target: its box and the anchors inside its patch region.
    patched: Vec<(BBox, Vec<usize>)>,
    genuine: Vec<usize>,
}

fn roles(scene: &Scene, det: &SurrogateDetector) -> Result<Roles> {
    let mut patched = Vec::new();
    let mut genuine = Vec::new();
    for t in &scene.targets {
        let Some(region) = t.patch else { continue };
        let inside: Vec<usize> = det
            .anchors()
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                let (cx, cy) = a.center();
                cx >= region.x && cx < region.right() && cy >= region.y && cy < region.bottom()
            })
            .map(|(k, _)| k)
            .collect();
        if !inside.is_empty() {
            patched.push((t.bbox, inside));
        }
        for (k, a) in det.anchors().iter().enumerate() {
            if iou(&a.bbox(), &t.bbox) >= GENUINE_IOU && !genuine.contains(&k) {
                genuine.push(k);
            }
        }
    }
    if patched.is_empty() {
        return Err(Error::InvalidConfig(
            "no anchor centre falls inside any patch region".into(),
        ));
    }
    if genuine.is_empty() {
        return Err(Error::InvalidConfig("no anchor overlaps a patched target".into()));
    }
    genuine.sort_unstable();
    Ok(Roles { patched, genuine })
}

/// Score-weighted mean of anchor corners.
fn soft_box(det: &SurrogateDetector, members: &[usize], scores: &[f64]) -> (BBox, f64) {
    let total: f64 = members.iter().map(|&k| scores[k]).sum();
    let mut c = [0.0; 4];
    for &k in members {
        let b = det.anchors()[k].bbox();
        let w = scores[k] / total;
        c[0] += w * b.x;
        c[1] += w * b.y;
        c[2] += w * b.right();
        c[3] += w * b.bottom();
    }
    (BBox::from_corners(c[0], c[1], c[2], c[3]), total)
}

impl Objective {
    pub fn new(detector: DetectorConfig, weights: LossWeights) -> Result<Self> {
        detector.validate()?;
        weights.validate()?;
        Ok(Self {
            detector,
            weights,
            cache: HashMap::new(),
        })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn detector(&mut self, width: usize, height: usize) -> Result<&SurrogateDetector> {
        if !self.cache.contains_key(&(width, height)) {
            let d = SurrogateDetector::new(self.detector.clone(), width, height)?;
            self.cache.insert((width, height), d);
        }
        Ok(&self.cache[&(width, height)])
    }

    pub fn loss(&mut self, scene: &Scene, patch: &Patch, eot: &EotTransform) -> Result<LossBreakdown> {
        Ok(self.run(scene, patch, eot, false)?.0)
    }

    pub fn loss_and_grad(
        &mut self,
        scene: &Scene,
        patch: &Patch,
        eot: &EotTransform,
    ) -> Result<(LossBreakdown, Vec<f64>)> {
        let (l, g) = self.run(scene, patch, eot, true)?;
        Ok((l, g.unwrap_or_default()))
    }

    fn run(
        &mut self,
        scene: &Scene,
        patch: &Patch,
        eot: &EotTransform,
        want_grad: bool,
    ) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
        let w = self.weights;
        let dims = FrameDims::new(scene.width as f64, scene.height as f64)?;
        let det = self.detector(scene.width, scene.height)?;
        let r = roles(scene, det)?;

        let shown = eot.apply(patch);
        let (raster, map) = render(scene, Some(&shown));
        let scores = det.scores(&raster);

        let soft: Vec<(BBox, f64)> = r.patched.iter().map(|(_, m)| soft_box(det, m, &scores)).collect();
        let patch_boxes: Vec<BBox> = soft.iter().map(|s| s.0).collect();
        let targets: Vec<BBox> = r.patched.iter().map(|p| p.0).collect();
        // Only boxes the detector would emit count; with none left the term is zero.
        let threshold = det.config().score_threshold;
        let emitted: Vec<usize> = r.genuine.iter().copied().filter(|&k| scores[k] >= threshold).collect();
        let genuine_scores: Vec<f64> = emitted.iter().map(|&k| scores[k]).collect();

        let bbr = loss_bbr(&patch_boxes, &targets, &dims)?;
        let ap = if emitted.is_empty() {
            0.0
        } else {
            loss_ap(&genuine_scores)?
        };
        let (tv, tv_grad) = if want_grad {
            let (v, g) = loss_tv_grad(patch)?;
            (v, Some(g))
        } else {
            (loss_tv(patch)?, None)
        };
        let breakdown = LossBreakdown {
            bbr,
            tv,
            ap,
            total: loss_total(bbr, tv, ap, &w),
        };
        let Some(tv_grad) = tv_grad else {
            return Ok((breakdown, None));
        };

        let mut grad_scores = vec![0.0; scores.len()];
        let n = patch_boxes.len() as f64;
        for ((target, members), (pb, total)) in r.patched.iter().zip(&soft) {
            // d/dcorners of mean(w/W + h/H) + 1 - mean(IoU).
            let d_iou = iou_corner_grad(pb, target);
            let size = [
                -1.0 / dims.width,
                -1.0 / dims.height,
                1.0 / dims.width,
                1.0 / dims.height,
            ];
            let corners = [pb.x, pb.y, pb.right(), pb.bottom()];
            for &k in members {
                let a = det.anchors()[k].bbox();
                let ac = [a.x, a.y, a.right(), a.bottom()];
                let mut g = 0.0;
                for c in 0..4 {
                    g += (size[c] - d_iou[c]) / n * (ac[c] - corners[c]) / total;
                }
                grad_scores[k] += w.beta * g;
            }
        }
        let per = w.delta / emitted.len().max(1) as f64;
        for &k in &emitted {
            grad_scores[k] += per;
        }

        let raster_grad = det.backward(&scores, &grad_scores);
        let shown_grad = map.backward(&raster_grad, shown.len());
        let mut grad = eot.backward(patch, &shown_grad);
        for (g, t) in grad.iter_mut().zip(&tv_grad) {
            *g += w.gamma * t;
        }
        Ok((breakdown, Some(grad)))
    }
}
