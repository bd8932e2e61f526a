//! Tracking-by-detection engine: constant-velocity Kalman prediction followed by
//! two-stage IoU association (high-score detections first, then low-score
//! detections against whatever tracks are left).

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::kalman::{KalmanNoise, KalmanState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Genuine,
    Injected,
}

/// One detector output. `provenance` is bookkeeping for the attack layer; the
/// tracker never looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub frame: u32,
    pub provenance: Provenance,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, frame: u32) -> Self {
        Self {
            bbox,
            score,
            frame,
            provenance: Provenance::Genuine,
        }
    }

    pub fn injected(bbox: BBox, score: f64, frame: u32) -> Self {
        Self {
            provenance: Provenance::Injected,
            ..Self::new(bbox, score, frame)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub score: f64,
    pub status: TrackStatus,
    pub hits: u32,
    pub frames_since_update: u32,
    pub start_frame: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Detections at or above this score enter the first association stage.
    pub high_thresh: f64,
    /// Detections below this score are ignored.
    pub low_thresh: f64,
    /// Minimum IoU for a first-stage match.
    pub iou_gate_1: f64,
    /// Minimum IoU for a second-stage match.
    pub iou_gate_2: f64,
    pub max_age: u32,
    pub min_hits: u32,
    /// Tracks born on the first frame of a sequence are confirmed at once.
    pub confirm_on_first_frame: bool,
    pub noise: KalmanNoise,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            high_thresh: 0.6,
            low_thresh: 0.1,
            iou_gate_1: 0.2,
            iou_gate_2: 0.5,
            max_age: 30,
            min_hits: 3,
            confirm_on_first_frame: true,
            noise: KalmanNoise::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low_thresh && self.low_thresh <= self.high_thresh && self.high_thresh <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= low_thresh <= high_thresh <= 1 (got {} and {})",
                self.low_thresh, self.high_thresh
            )));
        }
        for (name, g) in [("iou_gate_1", self.iou_gate_1), ("iou_gate_2", self.iou_gate_2)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1] (got {g})")));
            }
        }
        if self.min_hits == 0 {
            return Err(Error::InvalidConfig("min_hits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameOutput {
    pub frame: u32,
    pub tracks: Vec<TrackOutput>,
}

/// Confirmed tracks per frame, frame 1 first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingResult {
    pub frames: Vec<FrameOutput>,
}

impl TrackingResult {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn distinct_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.frames.iter().flat_map(|f| f.tracks.iter().map(|t| t.id)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Which association stage produced a match; exposed for gate auditing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub track_id: u64,
    pub detection: usize,
    pub stage: Stage,
    /// IoU between the predicted track box and the detection.
    pub iou: f64,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    frame: u32,
    last_matches: Vec<MatchRecord>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
            last_matches: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Frame index of the last processed step (0 before the first).
    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn last_matches(&self) -> &[MatchRecord] {
        &self.last_matches
    }

    /// Advances one frame. All detections must carry the frame number that follows
    /// the previously processed one.
    pub fn step(&mut self, detections: &[Detection]) -> Result<FrameOutput> {
        let frame = self.frame + 1;
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(if detections[0].frame != d.frame {
                Error::MixedFrames(detections[0].frame, d.frame)
            } else {
                Error::NonConsecutiveFrames {
                    expected: frame,
                    found: d.frame,
                }
            });
        }
        self.frame = frame;
        self.last_matches.clear();
        let cfg = self.cfg;

        for t in &mut self.tracks {
            t.state = cfg.noise.predict(&t.state);
        }

        let high: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].score >= cfg.high_thresh)
            .collect();
        let low: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].score >= cfg.low_thresh && detections[i].score < cfg.high_thresh)
            .collect();

        let all_tracks: Vec<usize> = (0..self.tracks.len()).collect();
        let (first, unmatched_tracks, unmatched_high) =
            self.associate(&all_tracks, detections, &high, cfg.iou_gate_1, Stage::High);
        let (second, still_unmatched, _) =
            self.associate(&unmatched_tracks, detections, &low, cfg.iou_gate_2, Stage::Low);

        for (ti, di) in first.into_iter().chain(second) {
            let det = &detections[di];
            let t = &mut self.tracks[ti];
            t.state = cfg.noise.update(&t.state, &det.bbox)?;
            t.score = det.score;
            t.hits += 1;
            t.frames_since_update = 0;
            t.status = match t.status {
                TrackStatus::Tentative if t.hits >= cfg.min_hits => TrackStatus::Confirmed,
                TrackStatus::Tentative => TrackStatus::Tentative,
                TrackStatus::Confirmed | TrackStatus::Lost => TrackStatus::Confirmed,
            };
        }

        for &ti in &still_unmatched {
            let t = &mut self.tracks[ti];
            t.frames_since_update += 1;
            if t.status == TrackStatus::Confirmed {
                t.status = TrackStatus::Lost;
            }
        }
        let max_age = cfg.max_age;
        self.tracks.retain(|t| match t.status {
            TrackStatus::Tentative => t.frames_since_update == 0,
            TrackStatus::Lost => t.frames_since_update < max_age,
            TrackStatus::Confirmed => true,
        });

        for di in unmatched_high {
            let det = &detections[di];
            if !(det.bbox.h > 0.0) {
                continue;
            }
            let confirmed = (cfg.confirm_on_first_frame && frame == 1) || cfg.min_hits <= 1;
            self.tracks.push(Track {
                id: self.next_id,
                state: cfg.noise.initiate(&det.bbox)?,
                score: det.score,
                status: if confirmed {
                    TrackStatus::Confirmed
                } else {
                    TrackStatus::Tentative
                },
                hits: 1,
                frames_since_update: 0,
                start_frame: frame,
            });
            self.next_id += 1;
        }

        let tracks = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.frames_since_update == 0)
            .map(|t| TrackOutput {
                id: t.id,
                bbox: t.state.bbox(),
                score: t.score,
            })
            .collect();
        Ok(FrameOutput { frame, tracks })
    }

    /// Matches the given track indices against the given detection indices.
    /// Returns matched `(track, detection)` index pairs plus the leftovers of both sides.
    fn associate(
        &mut self,
        track_idx: &[usize],
        detections: &[Detection],
        det_idx: &[usize],
        min_iou: f64,
        stage: Stage,
    ) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        let predicted: Vec<BBox> = track_idx.iter().map(|&t| self.tracks[t].state.bbox()).collect();
        let costs = CostMatrix::from_fn(track_idx.len(), det_idx.len(), 1.0 - min_iou, |r, c| {
            1.0 - iou(&predicted[r], &detections[det_idx[c]].bbox)
        });
        let a = solve(&costs);
        for &(r, c) in &a.matches {
            self.last_matches.push(MatchRecord {
                track_id: self.tracks[track_idx[r]].id,
                detection: det_idx[c],
                stage,
                iou: 1.0 - costs.get(r, c),
            });
        }
        (
            a.matches.iter().map(|&(r, c)| (track_idx[r], det_idx[c])).collect(),
            a.unmatched_rows.iter().map(|&r| track_idx[r]).collect(),
            a.unmatched_cols.iter().map(|&c| det_idx[c]).collect(),
        )
    }
}

/// Runs a fresh tracker over per-frame detection lists; `frames[i]` holds frame `i + 1`.
pub fn run_sequence(frames: &[Vec<Detection>], cfg: &TrackerConfig) -> Result<TrackingResult> {
    let mut tracker = Tracker::new(*cfg)?;
    let mut out = TrackingResult::default();
    for dets in frames {
        out.frames.push(tracker.step(dets)?);
    }
    Ok(out)
}

/// Groups a flat detection list into `n_frames` per-frame lists, keeping input order.
pub fn group_by_frame(detections: &[Detection], n_frames: u32) -> Result<Vec<Vec<Detection>>> {
    let mut frames = vec![Vec::new(); n_frames as usize];
    for d in detections {
        if d.frame == 0 || d.frame > n_frames {
            return Err(Error::NonConsecutiveFrames {
                expected: n_frames,
                found: d.frame,
            });
        }
        frames[d.frame as usize - 1].push(*d);
    }
    Ok(frames)
}
