//! MOTChallenge records: `frame,id,x,y,w,h,conf,class,visibility`.
//!
//! Floats are written with six decimals. Ground truth uses the conf column as the
//! "considered" flag (1 or 0); detections carry id -1.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scenario::{GroundTruth, GtBox};
use crate::tracker::{Detection, FrameOutput, TrackOutput, TrackingResult};

/// Value of an omitted trailing field.
pub const MISSING: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    /// -1 for raw detections.
    pub id: i64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
    pub class: i64,
    pub visibility: f64,
}

impl MotRecord {
    pub fn new(frame: u32, id: i64, b: &BBox, conf: f64) -> Self {
        Self {
            frame,
            id,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            conf,
            class: -1,
            visibility: MISSING,
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }

    pub fn render(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6}",
            self.frame, self.id, self.x, self.y, self.w, self.h, self.conf, self.class, self.visibility
        )
    }
}

fn real(field: &str, name: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            msg: format!("{name}: expected a finite number, found {field:?}"),
        }),
    }
}

/// Integers may be written as integral reals ("3.0"), as some tools do.
fn integer(field: &str, name: &str, line: usize) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(Error::Parse {
            line,
            msg: format!("{name}: expected an integer, found {field:?}"),
        }),
    }
}

/// Parses records in file order. Blank lines are skipped; `conf`, `class` and
/// `visibility` may be omitted and default to -1. A tenth column (the world coordinate
/// some detection files carry) is accepted and dropped.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let f: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(6..=10).contains(&f.len()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected 6 to 10 comma-separated fields, found {}", f.len()),
            });
        }
        let frame = integer(f[0], "frame", line)?;
        if frame < 1 || frame > u32::MAX as i64 {
            return Err(Error::Parse {
                line,
                msg: format!("frame must be a positive integer (got {frame})"),
            });
        }
        let opt_real = |k: usize, name: &str| f.get(k).map_or(Ok(MISSING), |v| real(v, name, line));
        if let Some(extra) = f.get(9) {
            real(extra, "world coordinate", line)?;
        }
        out.push(MotRecord {
            frame: frame as u32,
            id: integer(f[1], "id", line)?,
            x: real(f[2], "x", line)?,
            y: real(f[3], "y", line)?,
            w: real(f[4], "w", line)?,
            h: real(f[5], "h", line)?,
            conf: opt_real(6, "conf")?,
            class: f.get(7).map_or(Ok(-1), |v| integer(v, "class", line))?,
            visibility: opt_real(8, "visibility")?,
        });
    }
    Ok(out)
}

pub fn write_mot(records: &[MotRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 64);
    for r in records {
        s.push_str(&r.render());
        s.push('\n');
    }
    s
}

pub fn gt_records(gt: &GroundTruth) -> Vec<MotRecord> {
    gt.boxes
        .iter()
        .map(|g| MotRecord {
            class: 1,
            visibility: g.visibility,
            ..MotRecord::new(g.frame, g.id, &g.bbox, if g.considered { 1.0 } else { 0.0 })
        })
        .collect()
}

/// `n_frames` defaults to the last frame present. Missing visibility reads as fully
/// visible and a conf of 0 marks a box that scoring ignores.
pub fn ground_truth_from_records(records: &[MotRecord], n_frames: Option<u32>) -> Result<GroundTruth> {
    let last = records.iter().map(|r| r.frame).max().unwrap_or(0);
    let n = n_frames.unwrap_or(last);
    if last > n {
        return Err(Error::LengthMismatch(format!(
            "ground truth has frame {last} beyond the {n} declared"
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut boxes = Vec::with_capacity(records.len());
    for r in records {
        if r.id < 0 {
            return Err(Error::Format(format!(
                "ground-truth record in frame {} has negative id {}",
                r.frame, r.id
            )));
        }
        if !seen.insert((r.frame, r.id)) {
            return Err(Error::Format(format!("id {} appears twice in frame {}", r.id, r.frame)));
        }
        boxes.push(GtBox {
            visibility: if r.visibility < 0.0 { 1.0 } else { r.visibility },
            considered: r.conf != 0.0,
            ..GtBox::new(r.frame, r.id, r.bbox())
        });
    }
    Ok(GroundTruth::new(n, boxes))
}

pub fn detection_records(dets: &[Detection]) -> Vec<MotRecord> {
    dets.iter()
        .map(|d| MotRecord::new(d.frame, -1, &d.bbox, d.score))
        .collect()
}

pub fn detections_from_records(records: &[MotRecord]) -> Vec<Detection> {
    records
        .iter()
        .map(|r| Detection::new(r.bbox(), r.conf, r.frame))
        .collect()
}

pub fn track_records(result: &TrackingResult) -> Vec<MotRecord> {
    result
        .frames
        .iter()
        .flat_map(|f| {
            f.tracks
                .iter()
                .map(move |t| MotRecord::new(f.frame, t.id as i64, &t.bbox, t.score))
        })
        .collect()
}

/// Regroups tracker output; frames without records become empty frames.
pub fn tracking_result_from_records(records: &[MotRecord], n_frames: u32) -> Result<TrackingResult> {
    let mut by_frame: BTreeMap<u32, Vec<TrackOutput>> = BTreeMap::new();
    for r in records {
        if r.id < 0 {
            return Err(Error::Format(format!(
                "track record in frame {} has negative id {}",
                r.frame, r.id
            )));
        }
        if r.frame > n_frames {
            return Err(Error::LengthMismatch(format!(
                "track record in frame {} beyond the {n_frames} frames of the sequence",
                r.frame
            )));
        }
        by_frame.entry(r.frame).or_default().push(TrackOutput {
            id: r.id as u64,
            bbox: r.bbox(),
            score: r.conf,
        });
    }
    let frames = (1..=n_frames)
        .map(|frame| FrameOutput {
            frame,
            tracks: by_frame.remove(&frame).unwrap_or_default(),
        })
        .collect();
    Ok(TrackingResult { frames })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_line() {
        let r = parse_mot("1,1,10,20,30,60,0.9,1,1.0").unwrap();
        assert_eq!(r.len(), 1);
        let r = r[0];
        assert_eq!((r.frame, r.id), (1, 1));
        assert_eq!(r.bbox(), BBox::new(10.0, 20.0, 30.0, 60.0));
        assert_eq!((r.conf, r.class, r.visibility), (0.9, 1, 1.0));
    }

    #[test]
    fn detection_line_defaults_trailing_fields() {
        let r = parse_mot("1,-1,10,20,30,60,0.9").unwrap()[0];
        assert_eq!((r.id, r.conf, r.class, r.visibility), (-1, 0.9, -1, -1.0));
        let r = parse_mot("2,-1,10,20,30,60").unwrap()[0];
        assert_eq!(r.conf, -1.0);
    }

    #[test]
    fn blank_lines_skipped_order_kept() {
        let r = parse_mot("\n2,1,0,0,1,1\n\n1,2,0,0,1,1\n   \n").unwrap();
        assert_eq!(r.iter().map(|r| r.frame).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [
            ("1,1,0,0,1,1\n1,1,0,0", 2),
            ("1,1,0,0,1,1\n\n0,1,0,0,1,1", 3),
            ("x,1,0,0,1,1", 1),
            ("1,1,0,nan,1,1", 1),
            ("1,1,0,0,1,1,0.5,1.5", 1),
            ("1,1,0,0,1,1,1,1,1,1,1", 1),
        ] {
            match parse_mot(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn ten_column_detection_files_accepted() {
        let r = parse_mot("1,-1,1,2,3,4,0.5,-1,-1,-1").unwrap()[0];
        assert_eq!(r.visibility, -1.0);
    }

    #[test]
    fn integral_reals_accepted_as_ids() {
        assert_eq!(parse_mot("3.0,7.0,0,0,1,1").unwrap()[0].id, 7);
    }

    #[test]
    fn ground_truth_round_trip_keeps_flags() {
        let mut a = GtBox::new(1, 1, BBox::new(0.0, 0.0, 10.0, 20.0));
        a.visibility = 0.25;
        a.considered = false;
        let b = GtBox::new(2, 1, BBox::new(1.0, 0.0, 10.0, 20.0));
        let gt = GroundTruth::new(3, vec![a, b]);
        let text = write_mot(&gt_records(&gt));
        let back = ground_truth_from_records(&parse_mot(&text).unwrap(), Some(3)).unwrap();
        assert_eq!(back, gt);
        assert!(ground_truth_from_records(&parse_mot(&text).unwrap(), Some(1)).is_err());
    }

    #[test]
    fn duplicate_gt_ids_rejected() {
        let recs = parse_mot("1,1,0,0,1,1\n1,1,0,0,2,2").unwrap();
        assert!(ground_truth_from_records(&recs, None).is_err());
    }

    #[test]
    fn tracking_result_fills_empty_frames() {
        let recs = parse_mot("2,4,0,0,1,1,0.8").unwrap();
        let r = tracking_result_from_records(&recs, 3).unwrap();
        assert_eq!(r.frames.len(), 3);
        assert!(r.frames[0].tracks.is_empty());
        assert_eq!(r.frames[1].tracks[0].id, 4);
        assert_eq!(track_records(&r), recs);
        assert!(tracking_result_from_records(&recs, 1).is_err());
    }
}
