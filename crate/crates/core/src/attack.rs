//! Effect-level attack injection on detection streams.
//!
//! A physical patch acts on a tracker through the detector: it produces an extra
//! box overlapping the person who wears it and it suppresses that person's own
//! confidence. This module applies those effects directly to a clean detection
//! stream, along with baseline and control modes, and keeps a ledger of which
//! ground-truth boxes ended up under attack.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::scenario::{GroundTruth, GtBox};
use crate::tracker::{Detection, Provenance};

/// Overlap above which a ground-truth box counts as attacked.
pub const ATTACKED_IOU: f64 = 0.2;

/// Largest IoU a detector-only false box may have with its victim.
pub const DETECTOR_ONLY_MAX_IOU: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// False box overlapping the victim at `kappa_iou` plus victim score suppression.
    #[default]
    PatchHijack,
    /// False box too far from the victim to take its identity.
    DetectorOnly,
    /// Random box and score noise on victim detections.
    NoiseJitter,
    /// Unoptimised patch: occludes part of the victim, nothing else.
    ControlBlank,
}

/// Which side of the victim the false box is placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSide {
    /// Toward the closest other ground-truth object in the frame (right if alone).
    TowardNearest,
    Left,
    #[default]
    Right,
}

/// How the consecutive-attack length `T` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunLength {
    /// Longest run of consecutive attacked frames.
    #[default]
    LongestRun,
    /// Every frame with at least one attacked box, runs or not.
    AttackedFrames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Ground-truth identities that carry a patch.
    pub victims: Vec<i64>,
    /// First attacked frame (1-based).
    pub onset: u32,
    /// Number of attacked frames.
    pub duration: u32,
    /// Target IoU between the false box and the victim box.
    pub kappa_iou: f64,
    /// Multiplier applied to the victim's own detection score.
    pub score_drop: f64,
    /// Confidence assigned to false boxes.
    pub false_score: f64,
    /// IoU of the detector-only false box with its victim.
    pub detector_only_iou: f64,
    /// Box jitter for `noise_jitter`, pixels.
    pub noise_sigma: f64,
    /// Score jitter for `noise_jitter`.
    pub score_sigma: f64,
    /// Fraction of victim box area hidden by a control patch.
    pub occlusion_fraction: f64,
    pub offset_side: OffsetSide,
    /// Count incidentally overlapped bystanders as attacked.
    pub count_bystanders: bool,
    pub run_length: RunLength,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: AttackMode::PatchHijack,
            victims: vec![1],
            onset: 1,
            duration: 30,
            kappa_iou: 0.7,
            score_drop: 0.5,
            false_score: 0.8,
            detector_only_iou: DETECTOR_ONLY_MAX_IOU,
            noise_sigma: 10.0,
            score_sigma: 0.1,
            occlusion_fraction: 0.3,
            offset_side: OffsetSide::Right,
            count_bystanders: true,
            run_length: RunLength::LongestRun,
            seed: 7,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.kappa_iou > 0.0 && self.kappa_iou <= 1.0) {
            return bad(format!("kappa_iou must lie in (0, 1] (got {})", self.kappa_iou));
        }
        if !(0.0..=1.0).contains(&self.score_drop) {
            return bad(format!("score_drop must lie in [0, 1] (got {})", self.score_drop));
        }
        if !(0.0..=1.0).contains(&self.false_score) {
            return bad(format!("false_score must lie in [0, 1] (got {})", self.false_score));
        }
        if !(self.detector_only_iou > 0.0 && self.detector_only_iou <= DETECTOR_ONLY_MAX_IOU) {
            return bad(format!(
                "detector_only_iou must lie in (0, {DETECTOR_ONLY_MAX_IOU}] (got {})",
                self.detector_only_iou
            ));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return bad(format!(
                "occlusion_fraction must lie in [0, 1) (got {})",
                self.occlusion_fraction
            ));
        }
        if self.noise_sigma < 0.0 || self.score_sigma < 0.0 {
            return bad("noise scales must be non-negative".into());
        }
        if self.onset < 1 {
            return bad("onset must be at least 1".into());
        }
        if self.duration < 1 {
            return bad("duration must be at least 1".into());
        }
        Ok(())
    }

    pub fn in_window(&self, frame: u32) -> bool {
        frame >= self.onset && frame < self.onset + self.duration
    }
}

/// Ground-truth boxes marked attacked in one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameMarks {
    pub frame: u32,
    /// Ground-truth ids, ascending.
    pub attacked: Vec<i64>,
    /// False boxes added in this frame.
    #[serde(default)]
    pub injected: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttackLedger {
    /// One entry per frame of the sequence.
    pub frames: Vec<FrameMarks>,
    /// Attacked boxes over the whole sequence.
    pub p_n: u64,
    /// Consecutively attacked frames.
    pub t: u32,
    pub total_boxes: u64,
    pub r_bbox: f64,
    pub injected: u64,
}

impl AttackLedger {
    /// Builds totals from per-frame marks.
    pub fn from_marks(frames: Vec<FrameMarks>, total_boxes: u64, rule: RunLength) -> Self {
        let p_n: u64 = frames.iter().map(|f| f.attacked.len() as u64).sum();
        let injected = frames.iter().map(|f| f.injected as u64).sum();
        let t = run_length(&frames, rule);
        let r_bbox = if total_boxes == 0 {
            0.0
        } else {
            p_n as f64 / total_boxes as f64
        };
        Self {
            frames,
            p_n,
            t,
            total_boxes,
            r_bbox,
            injected,
        }
    }

    /// Ledger of a sequence nobody attacked.
    pub fn empty(gt: &GroundTruth) -> Self {
        let frames = (1..=gt.n_frames)
            .map(|frame| FrameMarks {
                frame,
                ..Default::default()
            })
            .collect();
        Self::from_marks(frames, gt.boxes.len() as u64, RunLength::LongestRun)
    }

    pub fn n_frames(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn is_attacked(&self, frame: u32, id: i64) -> bool {
        self.frames
            .get(frame.wrapping_sub(1) as usize)
            .is_some_and(|f| f.attacked.binary_search(&id).is_ok())
    }
}

fn run_length(frames: &[FrameMarks], rule: RunLength) -> u32 {
    match rule {
        RunLength::AttackedFrames => frames.iter().filter(|f| !f.attacked.is_empty()).count() as u32,
        RunLength::LongestRun => {
            let (mut best, mut cur) = (0u32, 0u32);
            let mut prev: Option<u32> = None;
            for f in frames.iter().filter(|f| !f.attacked.is_empty()) {
                cur = if prev == Some(f.frame.wrapping_sub(1)) {
                    cur + 1
                } else {
                    1
                };
                best = best.max(cur);
                prev = Some(f.frame);
            }
            best
        }
    }
}

/// Square region of one third of the victim's area, centred on the upper torso and
/// clipped to the victim box.
pub fn place_patch(victim: &BBox) -> BBox {
    let side = (victim.area() / 3.0).sqrt();
    let cx = victim.x + 0.5 * victim.w;
    let cy = victim.y + 0.3 * victim.h;
    let square = BBox::new(cx - 0.5 * side, cy - 0.5 * side, side, side);
    BBox::from_corners(
        square.x.max(victim.x),
        square.y.max(victim.y),
        square.right().min(victim.right()),
        square.bottom().min(victim.bottom()),
    )
}

/// Horizontal shift giving `iou(victim shifted by offset, victim) = target` for a box of
/// the victim's size, found by bisection. IoU falls monotonically with the shift.
pub fn offset_for_iou(victim: &BBox, target: f64) -> f64 {
    shift_for_iou(victim, target, false)
}

fn shift_for_iou(victim: &BBox, target: f64, vertical: bool) -> f64 {
    if target >= 1.0 || victim.area() <= 0.0 {
        return 0.0;
    }
    let moved = |d: f64| {
        if vertical {
            victim.translate(0.0, d)
        } else {
            victim.translate(d, 0.0)
        }
    };
    let f = |d: f64| iou(&moved(d), victim) - target;
    let extent = if vertical { victim.h } else { victim.w };
    let (mut lo, mut hi) = (0.0, extent);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * extent.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// False box of the victim's size shifted sideways to overlap it at `target` IoU.
pub fn false_box(victim: &BBox, target: f64, side: f64) -> BBox {
    victim.translate(side.signum() * offset_for_iou(victim, target), 0.0)
}

/// Detector-only false box: the victim's size shifted straight up to `target` IoU, so it
/// sits over the victim's head and never drifts across neighbours at the same depth.
pub fn hallucinated_box(victim: &BBox, target: f64) -> BBox {
    victim.translate(0.0, -shift_for_iou(victim, target, true))
}

fn side_for(victim: &GtBox, others: &[GtBox], rule: OffsetSide) -> f64 {
    match rule {
        OffsetSide::Left => -1.0,
        OffsetSide::Right => 1.0,
        OffsetSide::TowardNearest => {
            let (vx, vy) = victim.bbox.center();
            others
                .iter()
                .filter(|o| o.id != victim.id)
                .map(|o| {
                    let (ox, oy) = o.bbox.center();
                    ((ox - vx).hypot(oy - vy), ox - vx)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, dx)| if dx < 0.0 { -1.0 } else { 1.0 })
                .unwrap_or(1.0)
        }
    }
}

/// Index of the unclaimed detection that best covers `target` (IoU >= 0.5), if any.
fn own_detection(dets: &[Detection], target: &BBox, claimed: &[usize]) -> Option<usize> {
    dets.iter()
        .enumerate()
        .filter(|(i, d)| d.provenance == Provenance::Genuine && !claimed.contains(i))
        .map(|(i, d)| (i, iou(&d.bbox, target)))
        .filter(|&(_, v)| v >= 0.5)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn shrink(b: &BBox, area_fraction: f64) -> BBox {
    let k = (1.0 - area_fraction).sqrt();
    let (cx, cy) = b.center();
    let (w, h) = (b.w * k, b.h * k);
    BBox::new(cx - 0.5 * w, cy - 0.5 * h, w, h)
}

/// Applies the configured attack to a clean detection stream.
///
/// Returns detections grouped by frame (genuine ones first in their original order,
/// then injected ones) and the attack ledger.
pub fn inject(clean: &[Detection], gt: &GroundTruth, cfg: &AttackConfig) -> Result<(Vec<Detection>, AttackLedger)> {
    cfg.validate()?;
    let end = cfg.onset + cfg.duration;
    if cfg.onset > gt.n_frames || end - 1 > gt.n_frames {
        return Err(Error::WindowOutsideSequence {
            onset: cfg.onset,
            end,
            frames: gt.n_frames,
        });
    }
    let known = gt.ids();
    for v in &cfg.victims {
        if known.binary_search(v).is_err() {
            return Err(Error::UnknownVictim(*v));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let box_noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let score_noise = Normal::new(0.0, cfg.score_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let gt_frames = gt.by_frame();
    let mut per_frame: Vec<Vec<Detection>> = vec![Vec::new(); gt.n_frames as usize];
    for d in clean {
        if d.frame == 0 || d.frame > gt.n_frames {
            return Err(Error::NonConsecutiveFrames {
                expected: gt.n_frames,
                found: d.frame,
            });
        }
        per_frame[d.frame as usize - 1].push(*d);
    }

    let mut out = Vec::with_capacity(clean.len() + cfg.duration as usize * cfg.victims.len());
    let mut marks = Vec::with_capacity(gt.n_frames as usize);

    for frame in 1..=gt.n_frames {
        let fi = frame as usize - 1;
        let mut dets = std::mem::take(&mut per_frame[fi]);
        let boxes = &gt_frames[fi];
        // Boxes whose geometry or score the attack touched, plus injected ones.
        let mut touched: Vec<BBox> = Vec::new();
        let mut injected: Vec<Detection> = Vec::new();
        let mut claimed: Vec<usize> = Vec::new();

        if cfg.in_window(frame) {
            for victim in boxes.iter().filter(|b| cfg.victims.contains(&b.id)) {
                let own = own_detection(&dets, &victim.bbox, &claimed);
                claimed.extend(own);
                match cfg.mode {
                    AttackMode::PatchHijack => {
                        if let Some(i) = own {
                            dets[i].score *= cfg.score_drop;
                            touched.push(dets[i].bbox);
                        }
                        let side = side_for(victim, boxes, cfg.offset_side);
                        let b = false_box(&victim.bbox, cfg.kappa_iou, side);
                        injected.push(Detection::injected(b, cfg.false_score, frame));
                    }
                    AttackMode::DetectorOnly => {
                        // The victim still wears the patch, so its box counts as attacked
                        // even though the false box sits below the marking overlap.
                        touched.push(victim.bbox);
                        let b = hallucinated_box(&victim.bbox, cfg.detector_only_iou);
                        injected.push(Detection::injected(b, cfg.false_score, frame));
                    }
                    AttackMode::NoiseJitter => {
                        if let Some(i) = own {
                            let d = &mut dets[i];
                            let mut n = [0.0; 4];
                            for v in &mut n {
                                *v = box_noise.sample(&mut rng);
                            }
                            d.bbox = BBox::new(
                                d.bbox.x + n[0],
                                d.bbox.y + n[1],
                                (d.bbox.w + n[2]).max(1.0),
                                (d.bbox.h + n[3]).max(1.0),
                            );
                            d.score = (d.score + score_noise.sample(&mut rng)).clamp(0.0, 1.0);
                            touched.push(d.bbox);
                        }
                    }
                    AttackMode::ControlBlank => {
                        if let Some(i) = own {
                            dets[i].bbox = shrink(&dets[i].bbox, cfg.occlusion_fraction);
                            touched.push(dets[i].bbox);
                        }
                    }
                }
            }
        }
        touched.extend(injected.iter().map(|d| d.bbox));

        let attacked: BTreeSet<i64> = boxes
            .iter()
            .filter(|g| cfg.count_bystanders || cfg.victims.contains(&g.id))
            .filter(|g| touched.iter().any(|t| iou(t, &g.bbox) > ATTACKED_IOU))
            .map(|g| g.id)
            .collect();
        marks.push(FrameMarks {
            frame,
            attacked: attacked.into_iter().collect(),
            injected: injected.len() as u32,
        });

        out.extend(dets);
        out.extend(injected);
    }

    let ledger = AttackLedger::from_marks(marks, gt.boxes.len() as u64, cfg.run_length);
    Ok((out, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, preset};
    use rand::Rng;

    #[test]
    fn false_box_hits_requested_iou() {
        let victim = BBox::new(100.0, 100.0, 40.0, 80.0);
        let b = false_box(&victim, 0.8, 1.0);
        assert!((iou(&b, &victim) - 0.8).abs() <= 0.01);
        assert_eq!((b.w, b.h), (victim.w, victim.h));
        // Closed form for equal boxes shifted sideways: d = w (1 - k) / (1 + k).
        let d = offset_for_iou(&victim, 0.8);
        assert!((d - 40.0 * 0.2 / 1.8).abs() < 1e-9);
        for k in [0.15, 0.2, 0.5, 0.7, 0.9, 1.0] {
            assert!((iou(&false_box(&victim, k, -1.0), &victim) - k).abs() <= 0.01);
        }
    }

    #[test]
    fn hallucinated_box_sits_above_victim() {
        let victim = BBox::new(100.0, 100.0, 40.0, 80.0);
        let b = hallucinated_box(&victim, 0.15);
        // Vertical closed form: d = h (1 - k) / (1 + k).
        assert!((victim.y - b.y - 80.0 * 0.85 / 1.15).abs() < 1e-9);
        assert_eq!((b.x, b.w, b.h), (victim.x, victim.w, victim.h));
        assert!(iou(&b, &victim) <= DETECTOR_ONLY_MAX_IOU + 1e-9);
    }

    #[test]
    fn detector_only_leaves_victim_score() {
        let spec = preset("single").unwrap();
        let (gt, clean) = generate(&spec).unwrap();
        let cfg = AttackConfig {
            mode: AttackMode::DetectorOnly,
            onset: 10,
            duration: 5,
            ..Default::default()
        };
        let (att, ledger) = inject(&clean, &gt, &cfg).unwrap();
        let genuine: Vec<_> = att.iter().filter(|d| d.provenance == Provenance::Genuine).collect();
        assert_eq!(genuine.len(), clean.len());
        for (a, c) in genuine.iter().zip(&clean) {
            assert_eq!(a.score, c.score);
        }
        assert_eq!(ledger.injected, 5);
    }

    #[test]
    fn patch_region_one_third() {
        let p = place_patch(&BBox::new(0.0, 0.0, 30.0, 90.0));
        assert!((p.area() - 900.0).abs() < 1e-9);
        assert!((p.w - 30.0).abs() < 1e-9 && (p.h - 30.0).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ratios = Vec::new();
        for _ in 0..100 {
            let h = rng.random_range(40.0..200.0);
            let w = h * rng.random_range(0.35..0.7);
            let v = BBox::new(rng.random_range(0.0..500.0), rng.random_range(0.0..300.0), w, h);
            let p = place_patch(&v);
            assert!(v.contains(&p));
            ratios.push(p.area() / v.area());
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((0.25..=0.35).contains(&mean), "mean patch/person ratio {mean}");
    }

    #[test]
    fn control_blank_injects_nothing() {
        let (gt, clean) = generate(&preset("crossing").unwrap()).unwrap();
        let cfg = AttackConfig {
            mode: AttackMode::ControlBlank,
            ..AttackConfig::default()
        };
        let (out, ledger) = inject(&clean, &gt, &cfg).unwrap();
        assert_eq!(out.len(), clean.len());
        assert!(out.iter().all(|d| d.provenance == Provenance::Genuine));
        for (a, b) in out.iter().zip(&clean) {
            assert_eq!(a.score, b.score);
        }
        assert_eq!(ledger.injected, 0);
    }

    #[test]
    fn hijack_conserves_genuine_detections() {
        let (gt, clean) = generate(&preset("single").unwrap()).unwrap();
        let cfg = AttackConfig {
            onset: 20,
            duration: 10,
            ..AttackConfig::default()
        };
        let (out, ledger) = inject(&clean, &gt, &cfg).unwrap();
        let genuine: Vec<&Detection> = out.iter().filter(|d| d.provenance == Provenance::Genuine).collect();
        assert_eq!(genuine.len(), clean.len());
        assert_eq!(ledger.injected, 10);
        for (g, c) in genuine.iter().zip(&clean) {
            assert_eq!(g.bbox, c.bbox);
            if cfg.in_window(c.frame) {
                assert!((g.score - c.score * 0.5).abs() < 1e-15);
            } else {
                assert_eq!(g.score, c.score);
            }
        }
        assert_eq!(ledger.p_n, 10);
        assert_eq!(ledger.t, 10);
        assert!((ledger.r_bbox - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bystander_overlap_marks_attacked() {
        // Victim 1 with a bystander placed so the false box overlaps it at IoU 0.25.
        let victim = BBox::new(100.0, 100.0, 40.0, 80.0);
        let fake = false_box(&victim, 0.7, 1.0);
        let bystander = fake.translate(offset_for_iou(&fake, 0.25), 0.0);
        assert!((iou(&fake, &bystander) - 0.25).abs() < 1e-6);
        let gt = GroundTruth::new(1, vec![GtBox::new(1, 1, victim), GtBox::new(1, 2, bystander)]);
        let clean = vec![Detection::new(victim, 0.9, 1), Detection::new(bystander, 0.9, 1)];
        let cfg = AttackConfig {
            onset: 1,
            duration: 1,
            offset_side: OffsetSide::Right,
            ..AttackConfig::default()
        };
        let (_, ledger) = inject(&clean, &gt, &cfg).unwrap();
        assert_eq!(ledger.frames[0].attacked, vec![1, 2]);

        let strict = AttackConfig {
            count_bystanders: false,
            ..cfg
        };
        let (_, ledger) = inject(&clean, &gt, &strict).unwrap();
        assert_eq!(ledger.frames[0].attacked, vec![1]);
    }

    #[test]
    fn errors() {
        let (gt, clean) = generate(&preset("single").unwrap()).unwrap();
        let unknown = AttackConfig {
            victims: vec![9],
            ..AttackConfig::default()
        };
        assert!(matches!(inject(&clean, &gt, &unknown), Err(Error::UnknownVictim(9))));
        let late = AttackConfig {
            onset: 90,
            duration: 20,
            ..AttackConfig::default()
        };
        assert!(matches!(
            inject(&clean, &gt, &late),
            Err(Error::WindowOutsideSequence { .. })
        ));
        let bad = AttackConfig {
            kappa_iou: 0.0,
            ..AttackConfig::default()
        };
        assert!(inject(&clean, &gt, &bad).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let (gt, clean) = generate(&preset("crossing").unwrap()).unwrap();
        for mode in [
            AttackMode::PatchHijack,
            AttackMode::DetectorOnly,
            AttackMode::NoiseJitter,
            AttackMode::ControlBlank,
        ] {
            let cfg = AttackConfig {
                mode,
                ..AttackConfig::default()
            };
            assert_eq!(inject(&clean, &gt, &cfg).unwrap(), inject(&clean, &gt, &cfg).unwrap());
        }
    }

    #[test]
    fn run_length_rules() {
        let mk = |frames: &[u32]| -> Vec<FrameMarks> {
            (1..=10)
                .map(|f| FrameMarks {
                    frame: f,
                    attacked: if frames.contains(&f) { vec![1] } else { vec![] },
                    injected: 0,
                })
                .collect()
        };
        let marks = mk(&[2, 3, 4, 7, 8]);
        assert_eq!(run_length(&marks, RunLength::LongestRun), 3);
        assert_eq!(run_length(&marks, RunLength::AttackedFrames), 5);
        let l = AttackLedger::from_marks(marks, 20, RunLength::LongestRun);
        assert_eq!(l.p_n, 5);
        assert!((l.r_bbox - 0.25).abs() < 1e-12);
        assert!(l.is_attacked(7, 1));
        assert!(!l.is_attacked(5, 1));
    }
}
