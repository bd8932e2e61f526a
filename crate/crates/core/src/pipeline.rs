//! End-to-end runs behind the command-line tool: loading a sequence, tracking, attack
//! injection, scoring, patch optimisation and parameter sweeps.

use std::str::FromStr;

use rayon::prelude::*;

use crate::attack::{inject, AttackLedger};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::{self, RunConfig};
use crate::metrics::{evaluate, MetricsReport};
use crate::patchopt::{self, optimize_patch, score_retention, Patch, Scene, SceneTarget, TraceRow};
use crate::scenario::{generate, GroundTruth};
use crate::tracker::{group_by_frame, run_sequence, Detection, TrackerConfig, TrackingResult};

/// Ground truth with the clean detections of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub gt: GroundTruth,
    pub detections: Vec<Detection>,
}

/// The sequence named by the config: a generated scenario or MOT files on disk.
pub fn load_sequence(cfg: &RunConfig) -> Result<Sequence> {
    if let Some(spec) = cfg.scenario_spec()? {
        let (gt, detections) = generate(&spec)?;
        return Ok(Sequence { gt, detections });
    }
    let Some(input) = &cfg.input else {
        return Err(Error::Config {
            path: "<root>".into(),
            msg: "this run needs a `scenario` or `input` section".into(),
        });
    };
    let gt = load_ground_truth(cfg)?.expect("input section present");
    let Some(path) = &input.detections else {
        return Err(Error::Config {
            path: "input.detections".into(),
            msg: "required to build the clean detection stream".into(),
        });
    };
    let detections = io::detections_from_records(&io::parse_mot(&io::read_text(path)?)?);
    Ok(Sequence { gt, detections })
}

/// Ground truth alone, when the config names one.
pub fn load_ground_truth(cfg: &RunConfig) -> Result<Option<GroundTruth>> {
    if let Some(spec) = cfg.scenario_spec()? {
        spec.validate()?;
        return Ok(Some(spec.ground_truth()));
    }
    match &cfg.input {
        Some(input) => {
            let recs = io::parse_mot(&io::read_text(&input.gt)?)?;
            Ok(Some(io::ground_truth_from_records(&recs, input.n_frames)?))
        }
        None => Ok(None),
    }
}

pub fn track(detections: &[Detection], n_frames: u32, cfg: &TrackerConfig) -> Result<TrackingResult> {
    run_sequence(&group_by_frame(detections, n_frames)?, cfg)
}

/// Scores a clean and an attacked run with the victims and settings of `cfg`.
pub fn score_runs(
    label: &str,
    gt: &GroundTruth,
    clean: &TrackingResult,
    attacked: &TrackingResult,
    ledger: &AttackLedger,
    cfg: &RunConfig,
) -> Result<MetricsReport> {
    evaluate(label, gt, clean, attacked, ledger, &cfg.attack.victims, &cfg.metrics)
}

/// Everything one attacked run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRun {
    pub detections: Vec<Detection>,
    pub ledger: AttackLedger,
    pub tracks: TrackingResult,
    pub report: MetricsReport,
}

/// Injects the configured attack, tracks the result and scores it against `clean`.
pub fn attack_run(label: &str, seq: &Sequence, clean: &TrackingResult, cfg: &RunConfig) -> Result<AttackRun> {
    let (detections, ledger) = inject(&seq.detections, &seq.gt, &cfg.attack)?;
    let tracks = track(&detections, seq.gt.n_frames, &cfg.tracker)?;
    let report = score_runs(label, &seq.gt, clean, &tracks, &ledger, cfg)?;
    Ok(AttackRun {
        detections,
        ledger,
        tracks,
        report,
    })
}

/// Canvas cut around each victim when scenes are built from ground truth.
pub const VICTIM_WINDOW: (usize, usize) = (160, 128);
/// Frames sampled from the attack window for optimisation.
pub const SCENE_FRAMES: u32 = 8;

/// Training scenes for the patch: windows around each victim in up to eight frames
/// spread over the attack window, every ground-truth box drawn far to near, victims
/// wearing the patch. Without a sequence in the config, the reference fixture.
pub fn optimization_scenes(cfg: &RunConfig) -> Result<Vec<Scene>> {
    let Some(gt) = load_ground_truth(cfg)? else {
        return Ok(patchopt::fixture_scenes());
    };
    let dims = match cfg.scenario_spec()? {
        Some(spec) => (spec.dims.width, spec.dims.height),
        None => {
            let right = gt.boxes.iter().map(|b| b.bbox.right()).fold(0.0, f64::max);
            let bottom = gt.boxes.iter().map(|b| b.bbox.bottom()).fold(0.0, f64::max);
            (right.ceil(), bottom.ceil())
        }
    };
    scenes_from_ground_truth(&gt, dims, cfg)
}

fn scenes_from_ground_truth(gt: &GroundTruth, dims: (f64, f64), cfg: &RunConfig) -> Result<Vec<Scene>> {
    let a = &cfg.attack;
    let last = (a.onset + a.duration - 1).min(gt.n_frames);
    let span = last.saturating_sub(a.onset) + 1;
    let picks: Vec<u32> = (0..SCENE_FRAMES.min(span))
        .map(|k| a.onset + k * span / SCENE_FRAMES.min(span))
        .collect();
    let (ww, wh) = (VICTIM_WINDOW.0 as f64, VICTIM_WINDOW.1 as f64);
    let (fw, fh) = (dims.0.min(ww).max(1.0), dims.1.min(wh).max(1.0));
    let mut scenes = Vec::new();
    for frame in picks {
        let mut boxes: Vec<_> = gt.frame(frame).collect();
        boxes.sort_by(|p, q| p.bbox.bottom().total_cmp(&q.bbox.bottom()));
        for v in boxes.iter().filter(|b| a.victims.contains(&b.id)) {
            let (cx, cy) = v.bbox.center();
            let x0 = (cx - fw / 2.0).round().clamp(0.0, (dims.0 - fw).max(0.0));
            let y0 = (cy - fh / 2.0).round().clamp(0.0, (dims.1 - fh).max(0.0));
            let targets = boxes
                .iter()
                .map(|b| {
                    let local = BBox::new(b.bbox.x - x0, b.bbox.y - y0, b.bbox.w, b.bbox.h);
                    if a.victims.contains(&b.id) {
                        SceneTarget::patched(local, 0.8)
                    } else {
                        SceneTarget {
                            bbox: local,
                            intensity: 0.8,
                            patch: None,
                        }
                    }
                })
                .collect();
            scenes.push(Scene::new(fw as usize, fh as usize, 0.2, targets)?);
        }
    }
    if scenes.is_empty() {
        return Err(Error::EmptyInput(
            "optimisation scenes (no victim inside the attack window)",
        ));
    }
    Ok(scenes)
}

pub fn optimize(cfg: &RunConfig) -> Result<(Patch, Vec<TraceRow>)> {
    optimize_patch(&optimization_scenes(cfg)?, &cfg.patch)
}

/// Attack or transform parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KappaIou,
    ScoreDrop,
    FalseScore,
    /// Target fraction of attacked boxes, reached by adjusting the window length.
    RBbox,
    /// Half-range of patch rotation in degrees.
    EotRotation,
    /// Half-range of brightness around 1.
    EotBrightness,
    /// Largest blur radius.
    EotBlur,
    /// Half-range of scale around 1.
    EotScale,
}

impl SweepParam {
    pub const ALL: [SweepParam; 8] = [
        SweepParam::KappaIou,
        SweepParam::ScoreDrop,
        SweepParam::FalseScore,
        SweepParam::RBbox,
        SweepParam::EotRotation,
        SweepParam::EotBrightness,
        SweepParam::EotBlur,
        SweepParam::EotScale,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::KappaIou => "kappa_iou",
            SweepParam::ScoreDrop => "score_drop",
            SweepParam::FalseScore => "false_score",
            SweepParam::RBbox => "r_bbox",
            SweepParam::EotRotation => "eot_rotation",
            SweepParam::EotBrightness => "eot_brightness",
            SweepParam::EotBlur => "eot_blur",
            SweepParam::EotScale => "eot_scale",
        }
    }

    fn is_eot(&self) -> bool {
        matches!(
            self,
            SweepParam::EotRotation | SweepParam::EotBrightness | SweepParam::EotBlur | SweepParam::EotScale
        )
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            Error::InvalidConfig(format!(
                "unknown sweep parameter {s:?} (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub run: AttackRun,
}

/// Window length that brings the victims' share of all boxes closest to `target`.
fn duration_for(gt: &GroundTruth, cfg: &RunConfig, target: f64) -> Result<u32> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidConfig(format!(
            "r_bbox target must lie in [0, 1] (got {target})"
        )));
    }
    let total = gt.boxes.len() as f64;
    let max = gt.n_frames + 1 - cfg.attack.onset.min(gt.n_frames);
    let victim_boxes = |d: u32| {
        let end = cfg.attack.onset + d;
        gt.boxes
            .iter()
            .filter(|b| cfg.attack.victims.contains(&b.id) && b.frame >= cfg.attack.onset && b.frame < end)
            .count() as f64
    };
    Ok((1..=max)
        .min_by(|&p, &q| {
            let (ep, eq) = (
                (victim_boxes(p) / total - target).abs(),
                (victim_boxes(q) / total - target).abs(),
            );
            ep.total_cmp(&eq)
        })
        .unwrap_or(1))
}

/// Runs every value of `param` in parallel. Transform sweeps train one patch with the
/// configured transforms, measure how much victim score it leaves under each range
/// and attack with that as the score drop.
pub fn sweep(seq: &Sequence, cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let clean = track(&seq.detections, seq.gt.n_frames, &cfg.tracker)?;
    let trained = if param.is_eot() {
        let scenes = optimization_scenes(cfg)?;
        let (patch, _) = optimize_patch(&scenes, &cfg.patch)?;
        Some((scenes, patch))
    } else {
        None
    };
    values
        .par_iter()
        .map(|&value| {
            let mut point = cfg.clone();
            let a = &mut point.attack;
            let eot = &mut point.patch.eot;
            match param {
                SweepParam::KappaIou => a.kappa_iou = value,
                SweepParam::ScoreDrop => a.score_drop = value,
                SweepParam::FalseScore => a.false_score = value,
                SweepParam::RBbox => a.duration = duration_for(&seq.gt, cfg, value)?,
                SweepParam::EotRotation => eot.rotation_deg = [-value, value],
                SweepParam::EotBrightness => eot.brightness = [1.0 - value, 1.0 + value],
                SweepParam::EotBlur => eot.blur_radius = [0.0, value],
                SweepParam::EotScale => eot.scale = [1.0 - value, 1.0 + value],
            }
            if let Some((scenes, patch)) = &trained {
                let kept = score_retention(
                    scenes,
                    patch,
                    &point.patch.eot,
                    &point.patch.detector,
                    16,
                    point.patch.seed,
                )?;
                point.attack.score_drop = kept.clamp(0.0, 1.0);
            }
            point.validate()?;
            let label = format!("{}={value}", param.name());
            Ok(SweepPoint {
                value,
                run: attack_run(&label, seq, &clean, &point)?,
            })
        })
        .collect()
}

/// TASR, IOR and STASR against the swept value.
pub fn sweep_plot(param: SweepParam, points: &[SweepPoint]) -> String {
    let series = |name: &str, f: fn(&MetricsReport) -> f64| io::Series {
        name: name.into(),
        points: points.iter().map(|p| (p.value, f(&p.run.report))).collect(),
    };
    io::svg_line_plot(
        &format!("Attack rates over {}", param.name()),
        param.name(),
        "percent",
        &[
            series("TASR", |r| r.tasr),
            series("IOR", |r| r.ior),
            series("STASR", |r| r.stasr),
        ],
    )
}
