//! CLEAR-MOT and identity scores, plus attack-specific rates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::attack::{AttackLedger, ATTACKED_IOU};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::scenario::{GroundTruth, GtBox};
use crate::tracker::TrackingResult;

/// Which identities the attack-induced counts include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Victims,
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Minimum IoU for a ground-truth box and a hypothesis to correspond.
    pub match_iou: f64,
    /// Scope of the FP and IDsw increases in the targeted success rate.
    pub stasr_scope: Scope,
    /// Scope of the switch count in the identity overturn rate.
    pub ior_scope: Scope,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            match_iou: 0.5,
            stasr_scope: Scope::Victims,
            ior_scope: Scope::All,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "match_iou must lie in (0, 1] (got {})",
                self.match_iou
            )));
        }
        Ok(())
    }
}

/// Correspondences and error counts of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatching {
    pub frame: u32,
    /// `(gt id, hypothesis id)`, sorted by gt id.
    pub pairs: Vec<(i64, u64)>,
    pub fp: u32,
    pub fn_: u32,
    pub idsw: u32,
    /// Ground-truth ids whose hypothesis changed in this frame.
    pub switched: Vec<i64>,
    /// Unmatched hypothesis boxes.
    pub fp_boxes: Vec<BBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub mota: f64,
    pub idf1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClearScore {
    pub frames: Vec<FrameMatching>,
    pub mota: f64,
    pub idf1: f64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub gt_boxes: u64,
    pub hyp_boxes: u64,
    pub idtp: u64,
}

impl ClearScore {
    pub fn accuracy(&self) -> Accuracy {
        Accuracy {
            mota: self.mota,
            idf1: self.idf1,
        }
    }
}

type Hyps = Vec<(u64, BBox)>;

fn hypotheses_by_frame(gt: &GroundTruth, result: &TrackingResult) -> Result<Vec<Hyps>> {
    let mut out: Vec<Hyps> = vec![Vec::new(); gt.n_frames as usize];
    for f in &result.frames {
        if f.frame == 0 || f.frame > gt.n_frames {
            return Err(Error::LengthMismatch(format!(
                "result frame {} outside ground truth range 1..={}",
                f.frame, gt.n_frames
            )));
        }
        let slot = &mut out[f.frame as usize - 1];
        slot.extend(f.tracks.iter().map(|t| (t.id, t.bbox)));
    }
    for h in &mut out {
        h.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.x.total_cmp(&b.1.x))
                .then(a.1.y.total_cmp(&b.1.y))
        });
    }
    Ok(out)
}

/// Frame-by-frame CLEAR-MOT matching with a global identity assignment for IDF1.
///
/// Result frames missing from `result` count as empty frames.
pub fn score(gt: &GroundTruth, result: &TrackingResult, match_iou: f64) -> Result<ClearScore> {
    if gt.boxes.is_empty() {
        return Err(Error::EmptyInput("ground truth"));
    }
    let gate = 1.0 - match_iou;
    let (gts, hyps) = drop_ignored(gt.by_frame(), hypotheses_by_frame(gt, result)?, gate);

    let mut last: HashMap<i64, u64> = HashMap::new();
    let mut frames = Vec::with_capacity(gts.len());
    let (mut fp, mut fn_, mut idsw, mut hyp_boxes) = (0u64, 0u64, 0u64, 0u64);

    for (fi, (g, h)) in gts.iter().zip(&hyps).enumerate() {
        let mut gt_taken = vec![false; g.len()];
        let mut hyp_taken = vec![false; h.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        // Keep previous correspondences that still overlap enough.
        for (gi, gb) in g.iter().enumerate() {
            if let Some(&hid) = last.get(&gb.id) {
                if let Some(hj) = h.iter().position(|(id, _)| *id == hid) {
                    if !hyp_taken[hj] && iou(&gb.bbox, &h[hj].1) >= match_iou {
                        gt_taken[gi] = true;
                        hyp_taken[hj] = true;
                        pairs.push((gi, hj));
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !gt_taken[i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&j| !hyp_taken[j]).collect();
        let cost = CostMatrix::from_fn(free_g.len(), free_h.len(), gate, |r, c| {
            1.0 - iou(&g[free_g[r]].bbox, &h[free_h[c]].1)
        });
        let assignment = solve(&cost);

        let mut switched = Vec::new();
        for &(r, c) in &assignment.matches {
            let (gi, hj) = (free_g[r], free_h[c]);
            let (gid, hid) = (g[gi].id, h[hj].0);
            if last.get(&gid).is_some_and(|&prev| prev != hid) {
                switched.push(gid);
            }
            hyp_taken[hj] = true;
            pairs.push((gi, hj));
        }
        for &(gi, hj) in &pairs {
            last.insert(g[gi].id, h[hj].0);
        }

        let fp_boxes: Vec<BBox> = (0..h.len()).filter(|&j| !hyp_taken[j]).map(|j| h[j].1).collect();
        let frame_fp = fp_boxes.len() as u32;
        let frame_fn = (g.len() - pairs.len()) as u32;
        switched.sort_unstable();
        let mut id_pairs: Vec<(i64, u64)> = pairs.iter().map(|&(gi, hj)| (g[gi].id, h[hj].0)).collect();
        id_pairs.sort_unstable();

        fp += frame_fp as u64;
        fn_ += frame_fn as u64;
        idsw += switched.len() as u64;
        hyp_boxes += h.len() as u64;
        frames.push(FrameMatching {
            frame: fi as u32 + 1,
            pairs: id_pairs,
            fp: frame_fp,
            fn_: frame_fn,
            idsw: switched.len() as u32,
            switched,
            fp_boxes,
        });
    }

    let gt_boxes = gts.iter().map(Vec::len).sum::<usize>() as u64;
    if gt_boxes == 0 {
        return Err(Error::EmptyInput("considered ground truth"));
    }
    let mota = 100.0 * (1.0 - (fp + fn_ + idsw) as f64 / gt_boxes as f64);
    let idtp = identity_true_positives(&gts, &hyps, match_iou);
    let idf1 = 100.0 * 2.0 * idtp as f64 / (gt_boxes + hyp_boxes) as f64;

    Ok(ClearScore {
        frames,
        mota,
        idf1,
        fp,
        fn_,
        idsw,
        gt_boxes,
        hyp_boxes,
        idtp,
    })
}

/// Best total co-occurrence count over one-to-one pairings of gt and hypothesis ids.
/// Matches every box, ignored ones included, against the hypotheses; removes ignored
/// boxes and the hypotheses they claimed.
fn drop_ignored(gts: Vec<Vec<GtBox>>, hyps: Vec<Hyps>, gate: f64) -> (Vec<Vec<GtBox>>, Vec<Hyps>) {
    gts.into_iter()
        .zip(hyps)
        .map(|(g, h)| {
            if g.iter().all(|b| b.considered) {
                return (g, h);
            }
            let cost = CostMatrix::from_fn(g.len(), h.len(), gate, |r, c| 1.0 - iou(&g[r].bbox, &h[c].1));
            let mut keep = vec![true; h.len()];
            for &(r, c) in &solve(&cost).matches {
                if !g[r].considered {
                    keep[c] = false;
                }
            }
            let h = h.into_iter().zip(keep).filter(|(_, k)| *k).map(|(x, _)| x).collect();
            (g.into_iter().filter(|b| b.considered).collect(), h)
        })
        .unzip()
}

fn identity_true_positives(gts: &[Vec<GtBox>], hyps: &[Hyps], match_iou: f64) -> u64 {
    let mut overlap: BTreeMap<(i64, u64), u64> = BTreeMap::new();
    let mut gt_ids = BTreeSet::new();
    let mut hyp_ids = BTreeSet::new();
    for (g, h) in gts.iter().zip(hyps) {
        for gb in g {
            gt_ids.insert(gb.id);
            for (hid, hb) in h {
                if iou(&gb.bbox, hb) >= match_iou {
                    *overlap.entry((gb.id, *hid)).or_default() += 1;
                }
            }
        }
        hyp_ids.extend(h.iter().map(|(id, _)| *id));
    }
    if overlap.is_empty() {
        return 0;
    }
    let gt_ids: Vec<i64> = gt_ids.into_iter().collect();
    let hyp_ids: Vec<u64> = hyp_ids.into_iter().collect();
    let max = *overlap.values().max().unwrap_or(&0) as f64;
    let count = |r: usize, c: usize| *overlap.get(&(gt_ids[r], hyp_ids[c])).unwrap_or(&0);
    let cost = CostMatrix::from_fn(gt_ids.len(), hyp_ids.len(), f64::INFINITY, |r, c| {
        max - count(r, c) as f64
    });
    solve(&cost).matches.iter().map(|&(r, c)| count(r, c)).sum()
}

/// Combined accuracy decline per unit of attacked boxes, in percentage points.
pub fn tasr(clean: &Accuracy, attacked: &Accuracy, r_bbox: f64) -> Result<f64> {
    if !(r_bbox > 0.0) {
        return Err(Error::Undefined {
            what: "TASR",
            why: "no attacked boxes",
        });
    }
    Ok(((clean.mota - attacked.mota) + (clean.idf1 - attacked.idf1)) / (2.0 * r_bbox))
}

/// Switches per achievable switch, in percent. `P_t = n_frames / t` is kept real-valued.
pub fn ior(d_s: f64, n_frames: u32, t: u32) -> Result<f64> {
    if t == 0 {
        return Err(Error::Undefined {
            what: "IOR",
            why: "no consecutively attacked frames",
        });
    }
    if n_frames < t {
        return Err(Error::InvalidConfig(format!(
            "attack length {t} exceeds sequence length {n_frames}"
        )));
    }
    Ok(100.0 * d_s / (n_frames as f64 / t as f64))
}

/// FP and switch increases per attackable unit, in percent.
pub fn stasr(fp_increase: f64, idsw_increase: f64, p_t: f64, p_n: f64) -> Result<f64> {
    if !(p_t + p_n > 0.0) {
        return Err(Error::Undefined {
            what: "STASR",
            why: "no attackable units",
        });
    }
    Ok(100.0 * (fp_increase + idsw_increase) / (p_t + p_n))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub mota: f64,
    pub idf1: f64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub mota_clean: f64,
    pub idf1_clean: f64,
    pub idsw_clean: u64,
    pub tasr: f64,
    pub stasr: f64,
    pub ior: f64,
    pub r_bbox: f64,
    pub p_t: f64,
    pub p_n: u64,
    pub a_max: f64,
    pub t: u32,
    pub n_frames: u32,
    /// Switch count entering the overturn rate.
    pub d_s: i64,
    /// Distinct track ids in the attacked run that never appear in the clean run.
    pub spawned_ids: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "label,mota,idf1,fp,fn,idsw,mota_clean,idf1_clean,idsw_clean,tasr,stasr,ior,r_bbox,p_t,p_n,a_max,t,n_frames,d_s,spawned_ids";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{},{},{},{}",
            self.label,
            self.mota,
            self.idf1,
            self.fp,
            self.fn_,
            self.idsw,
            self.mota_clean,
            self.idf1_clean,
            self.idsw_clean,
            self.tasr,
            self.stasr,
            self.ior,
            self.r_bbox,
            self.p_t,
            self.p_n,
            self.a_max,
            self.t,
            self.n_frames,
            self.d_s,
            self.spawned_ids
        )
    }
}

/// `num / den` with the convention that nothing over nothing is zero.
fn rate_or_zero(value: Result<f64>, numerator_is_zero: bool) -> Result<f64> {
    match value {
        Ok(v) => Ok(v),
        Err(Error::Undefined { .. }) if numerator_is_zero => Ok(0.0),
        Err(e) => Err(e),
    }
}

fn victim_fp(frames: &[FrameMatching], gt: &GroundTruth, victims: &[i64]) -> u64 {
    frames
        .iter()
        .map(|f| {
            let targets: Vec<BBox> = gt
                .frame(f.frame)
                .filter(|g| victims.contains(&g.id))
                .map(|g| g.bbox)
                .collect();
            f.fp_boxes
                .iter()
                .filter(|b| targets.iter().any(|t| iou(b, t) > ATTACKED_IOU))
                .count() as u64
        })
        .sum()
}

fn victim_switches(frames: &[FrameMatching], victims: &[i64]) -> u64 {
    frames
        .iter()
        .flat_map(|f| f.switched.iter())
        .filter(|id| victims.contains(id))
        .count() as u64
}

/// Scores a clean and an attacked run against the same ground truth.
///
/// Rates whose denominator vanishes are reported as 0 when their numerator is also 0
/// (nothing attacked, nothing changed) and rejected otherwise.
pub fn evaluate(
    label: &str,
    gt: &GroundTruth,
    clean: &TrackingResult,
    attacked: &TrackingResult,
    ledger: &AttackLedger,
    victims: &[i64],
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    if ledger.n_frames() != gt.n_frames {
        return Err(Error::LengthMismatch(format!(
            "ledger covers {} frames, ground truth {}",
            ledger.n_frames(),
            gt.n_frames
        )));
    }
    let c = score(gt, clean, cfg.match_iou)?;
    let a = score(gt, attacked, cfg.match_iou)?;

    let decline_zero = c.mota == a.mota && c.idf1 == a.idf1;
    let tasr_v = rate_or_zero(tasr(&c.accuracy(), &a.accuracy(), ledger.r_bbox), decline_zero)?;

    let d_s = match cfg.ior_scope {
        Scope::All => a.idsw as i64 - c.idsw as i64,
        Scope::Victims => victim_switches(&a.frames, victims) as i64 - victim_switches(&c.frames, victims) as i64,
    };
    let p_t = if ledger.t == 0 {
        0.0
    } else {
        gt.n_frames as f64 / ledger.t as f64
    };
    let ior_v = rate_or_zero(ior(d_s as f64, gt.n_frames, ledger.t), d_s == 0)?;

    let (fp_inc, sw_inc) = match cfg.stasr_scope {
        Scope::All => (a.fp as f64 - c.fp as f64, a.idsw as f64 - c.idsw as f64),
        Scope::Victims => (
            victim_fp(&a.frames, gt, victims) as f64 - victim_fp(&c.frames, gt, victims) as f64,
            victim_switches(&a.frames, victims) as f64 - victim_switches(&c.frames, victims) as f64,
        ),
    };
    let stasr_v = rate_or_zero(
        stasr(fp_inc, sw_inc, p_t, ledger.p_n as f64),
        fp_inc == 0.0 && sw_inc == 0.0,
    )?;

    let clean_ids: BTreeSet<u64> = clean.distinct_ids().into_iter().collect();
    let spawned_ids = attacked
        .distinct_ids()
        .into_iter()
        .filter(|id| !clean_ids.contains(id))
        .count() as u64;

    Ok(MetricsReport {
        label: label.to_string(),
        mota: a.mota,
        idf1: a.idf1,
        fp: a.fp,
        fn_: a.fn_,
        idsw: a.idsw,
        mota_clean: c.mota,
        idf1_clean: c.idf1,
        idsw_clean: c.idsw,
        tasr: tasr_v,
        stasr: stasr_v,
        ior: ior_v,
        r_bbox: ledger.r_bbox,
        p_t,
        p_n: ledger.p_n,
        a_max: p_t + ledger.p_n as f64,
        t: ledger.t,
        n_frames: gt.n_frames,
        d_s,
        spawned_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute;
    use crate::tracker::{FrameOutput, TrackOutput};
    use proptest::prelude::*;

    fn result_from(frames: Vec<Vec<(u64, BBox)>>) -> TrackingResult {
        TrackingResult {
            frames: frames
                .into_iter()
                .enumerate()
                .map(|(i, ts)| FrameOutput {
                    frame: i as u32 + 1,
                    tracks: ts
                        .into_iter()
                        .map(|(id, bbox)| TrackOutput { id, bbox, score: 1.0 })
                        .collect(),
                })
                .collect(),
        }
    }

    fn gt_from(frames: &[Vec<(i64, BBox)>]) -> GroundTruth {
        let boxes = frames
            .iter()
            .enumerate()
            .flat_map(|(i, fr)| fr.iter().map(move |&(id, bbox)| GtBox::new(i as u32 + 1, id, bbox)))
            .collect();
        GroundTruth::new(frames.len() as u32, boxes)
    }

    #[test]
    fn ignored_boxes_neither_miss_nor_absorb() {
        let a = BBox::new(0.0, 0.0, 20.0, 40.0);
        let b = BBox::new(100.0, 0.0, 20.0, 40.0);
        let mut gt = gt_from(&[vec![(1, a), (2, b)], vec![(1, a), (2, b)]]);
        gt.boxes[1].considered = false;
        gt.boxes[3].considered = false;
        // Frame 1 covers the ignored box, frame 2 leaves it uncovered.
        let r = result_from(vec![vec![(1, a), (2, b)], vec![(1, a)]]);
        let s = score(&gt, &r, 0.5).unwrap();
        assert_eq!((s.fp, s.fn_, s.idsw, s.gt_boxes, s.hyp_boxes), (0, 0, 0, 2, 2));
        assert_eq!(s.mota, 100.0);
        assert_eq!(s.idf1, 100.0);

        for g in &mut gt.boxes {
            g.considered = false;
        }
        assert!(score(&gt, &r, 0.5).is_err());
    }

    fn two_walkers() -> Vec<Vec<(i64, BBox)>> {
        (0..3)
            .map(|t| {
                vec![
                    (1, BBox::new(10.0 + 2.0 * t as f64, 10.0, 20.0, 40.0)),
                    (2, BBox::new(100.0 - 2.0 * t as f64, 10.0, 20.0, 40.0)),
                ]
            })
            .collect()
    }

    /// Same CLEAR procedure with an exhaustive matcher in place of the Hungarian solver.
    fn oracle_switches(gt: &[Vec<(i64, BBox)>], hyp: &[Vec<(u64, BBox)>], thr: f64) -> u64 {
        let mut last: HashMap<i64, u64> = HashMap::new();
        let mut total = 0;
        for (g, h) in gt.iter().zip(hyp) {
            let mut g = g.clone();
            let mut h = h.clone();
            g.sort_by_key(|x| x.0);
            h.sort_by_key(|x| x.0);
            let mut kept_g = vec![false; g.len()];
            let mut kept_h = vec![false; h.len()];
            let mut now = Vec::new();
            for (gi, (gid, gb)) in g.iter().enumerate() {
                if let Some(prev) = last.get(gid) {
                    if let Some(hj) = h.iter().position(|(id, _)| id == prev) {
                        if !kept_h[hj] && iou(gb, &h[hj].1) >= thr {
                            kept_g[gi] = true;
                            kept_h[hj] = true;
                            now.push((*gid, h[hj].0));
                        }
                    }
                }
            }
            let fg: Vec<usize> = (0..g.len()).filter(|&i| !kept_g[i]).collect();
            let fh: Vec<usize> = (0..h.len()).filter(|&j| !kept_h[j]).collect();
            let c = CostMatrix::from_fn(fg.len(), fh.len(), 1.0 - thr, |r, k| {
                1.0 - iou(&g[fg[r]].1, &h[fh[k]].1)
            });
            let (_, _, pairs) = brute::best(&c);
            for (r, k) in pairs {
                let (gid, hid) = (g[fg[r]].0, h[fh[k]].0);
                if last.get(&gid).is_some_and(|&p| p != hid) {
                    total += 1;
                }
                now.push((gid, hid));
            }
            for (gid, hid) in now {
                last.insert(gid, hid);
            }
        }
        total
    }

    #[test]
    fn perfect_and_empty() {
        let frames = two_walkers();
        let gt = gt_from(&frames);
        let perfect = result_from(
            frames
                .iter()
                .map(|f| f.iter().map(|&(id, b)| (id as u64 + 10, b)).collect())
                .collect(),
        );
        let s = score(&gt, &perfect, 0.5).unwrap();
        assert_eq!((s.mota, s.idf1, s.idsw), (100.0, 100.0, 0));

        let s = score(&gt, &TrackingResult::default(), 0.5).unwrap();
        assert_eq!((s.mota, s.idf1, s.fn_), (0.0, 0.0, 6));

        let empty_gt = GroundTruth::new(3, vec![]);
        assert!(score(&empty_gt, &perfect, 0.5).is_err());
    }

    #[test]
    fn single_swap() {
        let frames = two_walkers();
        let gt = gt_from(&frames);
        // Hypothesis ids trade places in the last frame.
        let hyp: Vec<Vec<(u64, BBox)>> = frames
            .iter()
            .enumerate()
            .map(|(t, f)| {
                f.iter()
                    .map(|&(id, b)| {
                        let hid = if t == 2 { 3 - id as u64 } else { id as u64 };
                        (hid, b)
                    })
                    .collect()
            })
            .collect();
        let s = score(&gt, &result_from(hyp.clone()), 0.5).unwrap();
        assert_eq!(s.idsw, 2);
        assert_eq!(s.idsw, oracle_switches(&frames, &hyp, 0.5));

        // Only identity 1 jumps to a fresh hypothesis.
        let hyp: Vec<Vec<(u64, BBox)>> = frames
            .iter()
            .enumerate()
            .map(|(t, f)| {
                f.iter()
                    .map(|&(id, b)| (if t == 2 && id == 1 { 7 } else { id as u64 }, b))
                    .collect()
            })
            .collect();
        let s = score(&gt, &result_from(hyp.clone()), 0.5).unwrap();
        assert_eq!(s.idsw, 1);
        assert_eq!(s.frames[2].switched, vec![1]);
        assert_eq!(oracle_switches(&frames, &hyp, 0.5), 1);
        assert!((s.mota - 100.0 * (1.0 - 1.0 / 6.0)).abs() < 1e-12);
        // Identity 1 keeps 2 of 3 frames under its best hypothesis.
        assert_eq!(s.idtp, 5);
    }

    #[test]
    fn persistence_beats_better_overlap() {
        let g = BBox::new(0.0, 0.0, 10.0, 10.0);
        let gt = gt_from(&[vec![(1, g)], vec![(1, g)]]);
        let hyp = result_from(vec![vec![(1, g)], vec![(1, g.translate(2.0, 0.0)), (2, g)]]);
        let s = score(&gt, &hyp, 0.5).unwrap();
        assert_eq!(s.idsw, 0);
        assert_eq!(s.frames[1].pairs, vec![(1, 1)]);
        assert_eq!(s.fp, 1);
    }

    #[test]
    fn formulas() {
        let clean = Accuracy { mota: 90.0, idf1: 80.0 };
        let att = Accuracy { mota: 70.0, idf1: 70.0 };
        assert_eq!(tasr(&clean, &att, 0.5).unwrap(), 30.0);
        assert_eq!(tasr(&clean, &att, 0.25).unwrap(), 60.0);
        assert_eq!(tasr(&clean, &clean, 0.5).unwrap(), 0.0);
        assert!(tasr(&clean, &att, 0.0).is_err());
        assert_eq!(ior(5.0, 100, 20).unwrap(), 100.0);
        assert_eq!(ior(0.0, 100, 20).unwrap(), 0.0);
        assert!(ior(1.0, 100, 0).is_err());
        assert!(ior(1.0, 10, 20).is_err());
        assert_eq!(stasr(8.0, 2.0, 5.0, 15.0).unwrap(), 50.0);
        assert_eq!(stasr(0.0, 0.0, 5.0, 15.0).unwrap(), 0.0);
        assert!(stasr(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn identical_runs_give_zero_rates() {
        let frames = two_walkers();
        let gt = gt_from(&frames);
        let r = result_from(
            frames
                .iter()
                .map(|f| f.iter().map(|&(id, b)| (id as u64, b)).collect())
                .collect(),
        );
        let mut ledger = AttackLedger::empty(&gt);
        let rep = evaluate("x", &gt, &r, &r, &ledger, &[1], &MetricsConfig::default()).unwrap();
        assert_eq!((rep.tasr, rep.ior, rep.stasr), (0.0, 0.0, 0.0));

        ledger.frames[1].attacked = vec![1];
        let ledger = AttackLedger::from_marks(ledger.frames, 6, Default::default());
        let rep = evaluate("x", &gt, &r, &r, &ledger, &[1], &MetricsConfig::default()).unwrap();
        assert_eq!((rep.tasr, rep.ior, rep.stasr), (0.0, 0.0, 0.0));
        assert_eq!(rep.a_max, rep.p_t + rep.p_n as f64);
    }

    fn random_sequence(seed: u64, n_obj: usize, n_frames: usize) -> (Vec<Vec<(i64, BBox)>>, Vec<Vec<(u64, BBox)>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<(f64, f64)> = (0..n_obj)
            .map(|_| (rng.random_range(0.0..60.0), rng.random_range(0.0..20.0)))
            .collect();
        let mut gt = Vec::new();
        let mut hyp = Vec::new();
        for _ in 0..n_frames {
            let mut g = Vec::new();
            let mut h = Vec::new();
            for (i, p) in pos.iter_mut().enumerate() {
                p.0 += rng.random_range(-3.0..3.0);
                p.1 += rng.random_range(-1.0..1.0);
                let b = BBox::new(p.0, p.1, 20.0, 40.0);
                if rng.random_bool(0.9) {
                    g.push((i as i64 + 1, b));
                }
                if rng.random_bool(0.85) {
                    let hid = rng.random_range(1..=n_obj as u64 + 2);
                    if !h.iter().any(|(id, _)| *id == hid) {
                        let jit = b.translate(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
                        h.push((hid, jit));
                    }
                }
            }
            gt.push(g);
            hyp.push(h);
        }
        (gt, hyp)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(150))]

        #[test]
        fn switches_match_exhaustive_oracle(seed in any::<u64>(), n_obj in 1usize..=5, n_frames in 1usize..=20) {
            let (g, h) = random_sequence(seed, n_obj, n_frames);
            let gt = gt_from(&g);
            prop_assume!(!gt.boxes.is_empty());
            let s = score(&gt, &result_from(h.clone()), 0.5).unwrap();
            prop_assert_eq!(s.idsw, oracle_switches(&g, &h, 0.5));
        }

        #[test]
        fn record_order_irrelevant(seed in any::<u64>(), n_obj in 1usize..=5) {
            let (g, h) = random_sequence(seed, n_obj, 10);
            let gt = gt_from(&g);
            prop_assume!(!gt.boxes.is_empty());
            let mut g_rev = g.clone();
            let mut h_rev = h.clone();
            for f in g_rev.iter_mut() { f.reverse(); }
            for f in h_rev.iter_mut() { f.reverse(); }
            let a = score(&gt, &result_from(h), 0.5).unwrap();
            let b = score(&gt_from(&g_rev), &result_from(h_rev), 0.5).unwrap();
            prop_assert_eq!((a.mota, a.idf1, a.idsw, a.fp, a.fn_), (b.mota, b.idf1, b.idsw, b.fp, b.fn_));
        }

        #[test]
        fn score_bounds(seed in any::<u64>(), n_obj in 1usize..=5) {
            let (g, h) = random_sequence(seed, n_obj, 12);
            let gt = gt_from(&g);
            prop_assume!(!gt.boxes.is_empty());
            let s = score(&gt, &result_from(h), 0.5).unwrap();
            prop_assert!(s.mota <= 100.0);
            prop_assert!((0.0..=100.0).contains(&s.idf1));
        }
    }
}
