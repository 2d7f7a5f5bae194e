//! Long-term tracking metrics: soft/hard mismatches, Frag, IDSW, CRP and CRS.
//!
//! A soft mismatch is a change of an identity's track id to an id never seen
//! before anywhere in the scan (fragmentation); a hard mismatch is a change to
//! an id that was already in use (an identity switch). An identity's first
//! assignment is not a mismatch, and detections without a track are skipped.
//!
//! Completion of an identity is the largest share of its detections carried
//! by a single track id; `CR_X` is the fraction of identities whose completion
//! reaches `X%`, sampled at `X = 1..=100`, and CRS is the mean of those samples.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sig9;
use crate::types::{DetId, GtId, TrackId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub det_id: DetId,
    pub frame: u64,
    pub gt_id: GtId,
    pub track: Option<TrackId>,
}

/// Ground-truth-labelled assignments, sorted by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalInput {
    pub records: Vec<EvalRecord>,
}

impl EvalInput {
    pub fn new(records: Vec<EvalRecord>) -> Result<Self> {
        if records.windows(2).any(|w| w[1].frame < w[0].frame) {
            return Err(Error::Evaluation("records are not sorted by frame".into()));
        }
        Ok(Self { records })
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same records with every track id replaced by `f(id)`.
    pub fn relabel(&self, f: impl Fn(TrackId) -> TrackId) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| EvalRecord {
                    track: r.track.map(&f),
                    ..*r
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatches {
    pub smme: u64,
    pub hmme: u64,
}

pub fn count_mismatches(input: &EvalInput) -> Mismatches {
    let mut current: HashMap<GtId, TrackId> = HashMap::new();
    let mut seen: HashSet<TrackId> = HashSet::new();
    let mut out = Mismatches::default();
    for r in &input.records {
        let Some(track) = r.track else { continue };
        if let Some(prev) = current.insert(r.gt_id, track) {
            if prev != track {
                if seen.contains(&track) {
                    out.hmme += 1;
                } else {
                    out.smme += 1;
                }
            }
        }
        seen.insert(track);
    }
    out
}

/// Per-identity `(covered, total)`: detections on the majority track and all detections.
pub fn completions(input: &EvalInput) -> Vec<(GtId, u64, u64)> {
    let mut per_gt: HashMap<GtId, (u64, HashMap<TrackId, u64>)> = HashMap::new();
    for r in &input.records {
        let e = per_gt.entry(r.gt_id).or_default();
        e.0 += 1;
        if let Some(t) = r.track {
            *e.1.entry(t).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(GtId, u64, u64)> = per_gt
        .into_iter()
        .map(|(g, (total, counts))| (g, counts.values().copied().max().unwrap_or(0), total))
        .collect();
    out.sort_unstable();
    out
}

/// `CR_X` for `X = 1..=100`.
pub fn completion_rates(input: &EvalInput) -> Vec<f64> {
    let comps = completions(input);
    let ids = comps.len() as f64;
    (1..=100u64)
        .map(|x| {
            if comps.is_empty() {
                return 0.0;
            }
            // covered / total >= x / 100, in integers
            let hit = comps.iter().filter(|&&(_, c, t)| 100 * c >= x * t).count();
            hit as f64 / ids
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub smme_count: u64,
    pub hmme_count: u64,
    #[serde(serialize_with = "sig9")]
    pub frag: f64,
    #[serde(serialize_with = "sig9")]
    pub idsw: f64,
    #[serde(serialize_with = "sig9")]
    pub crs: f64,
    #[serde(serialize_with = "crate::io::sig9_vec")]
    pub crp: Vec<f64>,
    pub num_dets: u64,
    pub num_ids: u64,
}

pub fn evaluate(input: &EvalInput) -> Result<EvalReport> {
    if input.is_empty() {
        return Err(Error::Evaluation("no ground-truth detections to evaluate".into()));
    }
    let m = count_mismatches(input);
    let crp = completion_rates(input);
    let num_dets = input.records.len() as u64;
    let num_ids = input.records.iter().map(|r| r.gt_id).collect::<HashSet<_>>().len() as u64;
    Ok(EvalReport {
        smme_count: m.smme,
        hmme_count: m.hmme,
        frag: m.smme as f64 / num_dets as f64,
        idsw: m.hmme as f64 / num_dets as f64,
        crs: crp.iter().sum::<f64>() / 100.0,
        crp,
        num_dets,
        num_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(rows: &[(u64, u64, Option<u64>)]) -> EvalInput {
        EvalInput::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(frame, gt, track))| EvalRecord {
                    det_id: DetId(i as u64),
                    frame,
                    gt_id: GtId(gt),
                    track: track.map(TrackId),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_tracking() {
        let inp = input(&[(0, 1, Some(1)), (0, 2, Some(2)), (1, 1, Some(1)), (1, 2, Some(2))]);
        assert_eq!(count_mismatches(&inp), Mismatches { smme: 0, hmme: 0 });
        let rep = evaluate(&inp).unwrap();
        assert_eq!((rep.frag, rep.idsw, rep.crs), (0.0, 0.0, 1.0));
        assert!(rep.crp.iter().all(|&c| c == 1.0));
        assert_eq!((rep.num_dets, rep.num_ids), (4, 2));
    }

    #[test]
    fn switch_to_fresh_id_is_soft() {
        let inp = input(&[(0, 1, Some(1)), (1, 1, Some(1)), (2, 1, Some(2)), (3, 1, Some(2))]);
        assert_eq!(count_mismatches(&inp), Mismatches { smme: 1, hmme: 0 });
    }

    #[test]
    fn switch_to_used_id_is_hard() {
        let inp = input(&[
            (0, 1, Some(1)),
            (0, 2, Some(2)),
            (1, 1, Some(1)),
            (1, 2, Some(2)),
            (2, 1, Some(1)),
            (2, 2, Some(1)),
        ]);
        assert_eq!(count_mismatches(&inp), Mismatches { smme: 0, hmme: 1 });
    }

    #[test]
    fn unassigned_detections_are_skipped_but_uncovered() {
        let inp = input(&[(0, 1, Some(1)), (1, 1, None), (2, 1, Some(1)), (3, 1, None)]);
        assert_eq!(count_mismatches(&inp), Mismatches::default());
        assert_eq!(completions(&inp), vec![(GtId(1), 2, 4)]);
    }

    #[test]
    fn half_split_completion() {
        let inp = input(&[(0, 1, Some(1)), (1, 1, Some(1)), (2, 1, Some(2)), (3, 1, Some(2))]);
        let crp = completion_rates(&inp);
        for (i, &c) in crp.iter().enumerate() {
            let x = i + 1;
            assert_eq!(c, if x <= 50 { 1.0 } else { 0.0 }, "X = {x}");
        }
    }

    #[test]
    fn three_identities_cr50() {
        // completions 1.0, 0.6, 0.2
        let mut rows = Vec::new();
        for f in 0..5 {
            rows.push((f, 1, Some(1)));
        }
        for f in 0..5 {
            rows.push((f, 2, Some(if f < 3 { 2 } else { 3 })));
        }
        for f in 0..5 {
            rows.push((f, 3, Some(10 + f)));
        }
        rows.sort_by_key(|r| r.0);
        let inp = input(&rows);
        let crp = completion_rates(&inp);
        assert!((crp[49] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn frag_formula() {
        let mut rows: Vec<(u64, u64, Option<u64>)> = (0..99).map(|f| (f, 1, Some(1))).collect();
        rows.push((99, 1, Some(2)));
        let rep = evaluate(&input(&rows)).unwrap();
        assert_eq!(rep.smme_count, 1);
        assert!((rep.frag - 0.01).abs() < 1e-15);
    }

    #[test]
    fn empty_and_unsorted_rejected() {
        assert!(evaluate(&EvalInput::default()).is_err());
        let recs = vec![
            EvalRecord { det_id: DetId(0), frame: 3, gt_id: GtId(1), track: None },
            EvalRecord { det_id: DetId(1), frame: 2, gt_id: GtId(1), track: None },
        ];
        assert!(EvalInput::new(recs).is_err());
    }
}
