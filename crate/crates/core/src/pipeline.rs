//! Frame-by-frame tracking pipeline: prediction, association, lifecycle,
//! template collection, reconnection and correction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::assoc::associate;
use crate::config::{Config, FbtrMode, PredictorKind};
use crate::correction::TrackRecord;
use crate::error::{Error, Result};
use crate::metrics::{EvalInput, EvalRecord};
use crate::quality::classify;
use crate::reconnect::{try_reconnect, Gallery, JoinPair, Outcome};
use crate::scalar::Real;
use crate::sim::GhostTracklet;
use crate::tracklet::{TrackIdAllocator, TrackStatus, Tracklet};
use crate::types::{BBox, DetId, Detection, GtId, TrackId};

/// One output row: the id a detection got when its frame was processed and
/// the id after retroactive correction (equal when correction is off).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackOutputRecord {
    pub frame: u64,
    pub det_id: DetId,
    pub track_id_emitted: TrackId,
    pub track_id_corrected: TrackId,
}

/// A fusion annotated with the majority ground-truth identity on each side
/// at the moment it happened (when labels are available).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinEvent {
    pub pair: JoinPair,
    pub absorbed_gt: Option<GtId>,
    pub surviving_gt: Option<GtId>,
}

impl JoinEvent {
    /// Both sides labelled and the majorities differ, or a labelled tracklet
    /// was fused into an unlabelled one (a distractor).
    pub fn is_wrong(&self) -> bool {
        match (self.absorbed_gt, self.surviving_gt) {
            (Some(a), Some(s)) => a != s,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub frames: u64,
    pub detections: u64,
    pub tracklets_created: u64,
    pub queries: u64,
    pub fusions: u64,
    pub rejected_threshold: u64,
    pub rejected_rank_margin: u64,
    pub no_candidates: u64,
    pub clamped_predictions: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tracks: Vec<TrackOutputRecord>,
    pub joins: Vec<JoinPair>,
    pub join_events: Vec<JoinEvent>,
    pub stats: RunStats,
    gt: HashMap<DetId, GtId>,
}

impl RunOutput {
    /// Evaluation input over every labelled detection, using corrected ids.
    pub fn eval_input(&self) -> EvalInput {
        let records = self
            .tracks
            .iter()
            .filter_map(|r| {
                self.gt.get(&r.det_id).map(|&g| EvalRecord {
                    det_id: r.det_id,
                    frame: r.frame,
                    gt_id: g,
                    track: Some(r.track_id_corrected),
                })
            })
            .collect();
        EvalInput { records }
    }

    pub fn wrong_fusions(&self) -> usize {
        self.join_events.iter().filter(|e| e.is_wrong()).count()
    }
}

pub struct Tracker<T> {
    cfg: Config<T>,
    tracklets: BTreeMap<TrackId, Tracklet<T>>,
    live: BTreeSet<TrackId>,
    gallery: Gallery<T>,
    ids: TrackIdAllocator,
    record: TrackRecord,
    order: Vec<(u64, DetId)>,
    events: Vec<JoinEvent>,
    gt: HashMap<DetId, GtId>,
    last_frame: Option<u64>,
    stats: RunStats,
}

impl<T: Real> Tracker<T> {
    pub fn new(cfg: Config<T>) -> Result<Self> {
        cfg.validate()?;
        let record = TrackRecord::new(cfg.cm_enabled);
        Ok(Self {
            cfg,
            tracklets: BTreeMap::new(),
            live: BTreeSet::new(),
            gallery: Gallery::new(),
            ids: TrackIdAllocator::default(),
            record,
            order: Vec::new(),
            events: Vec::new(),
            gt: HashMap::new(),
            last_frame: None,
            stats: RunStats::default(),
        })
    }

    pub fn config(&self) -> &Config<T> {
        &self.cfg
    }

    /// Registers distractor tracklets in the gallery. Returns their track ids.
    pub fn preload_ghosts(&mut self, ghosts: &[GhostTracklet<T>]) -> Vec<TrackId> {
        ghosts
            .iter()
            .map(|g| {
                let id = self.ids.next_id();
                let t = Tracklet::from_templates(id, g.enrollables.clone(), g.verifiables.clone());
                self.gallery.insert_tracklet(&t);
                self.tracklets.insert(id, t);
                id
            })
            .collect()
    }

    pub fn tracklet(&self, id: TrackId) -> Option<&Tracklet<T>> {
        self.tracklets.get(&id)
    }

    pub fn tracklets(&self) -> impl Iterator<Item = &Tracklet<T>> {
        self.tracklets.values()
    }

    pub fn record(&self) -> &TrackRecord {
        &self.record
    }

    pub fn gallery(&self) -> &Gallery<T> {
        &self.gallery
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    fn predictor_kind(&self) -> PredictorKind {
        if self.cfg.tm_enabled {
            self.cfg.predictor
        } else {
            PredictorKind::Static
        }
    }

    /// Coasts every live tracklet through frames that carried no detections.
    fn coast_until(&mut self, frame: u64) -> Result<()> {
        let Some(last) = self.last_frame else {
            return Ok(());
        };
        for f in last + 1..frame {
            let live: Vec<TrackId> = self.live.iter().copied().collect();
            for id in live {
                let t = self.tracklets.get_mut(&id).expect("live tracklet exists");
                t.step(None, f, self.cfg.t_max)?;
                if t.status == TrackStatus::Dead {
                    self.live.remove(&id);
                }
            }
            self.stats.frames += 1;
        }
        Ok(())
    }

    /// Processes all detections of one frame. Frames must strictly increase.
    pub fn process_frame(&mut self, frame: u64, detections: &[Detection<T>]) -> Result<()> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Lifecycle(format!("frame {frame} does not follow frame {last}")));
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::Lifecycle(format!(
                "detection {} belongs to frame {}, not {frame}",
                d.det_id, d.frame
            )));
        }
        self.coast_until(frame)?;
        self.last_frame = Some(frame);
        self.stats.frames += 1;
        self.stats.detections += detections.len() as u64;

        // prediction
        let live: Vec<TrackId> = self.live.iter().copied().collect();
        let mut candidates: Vec<TrackId> = Vec::with_capacity(live.len());
        let mut predicted: Vec<BBox<T>> = Vec::with_capacity(live.len());
        for &id in &live {
            let t = self.tracklets.get_mut(&id).expect("live tracklet exists");
            if self.cfg.tm_enabled {
                let p = t.predict(frame)?;
                if p.clamped {
                    self.stats.clamped_predictions += 1;
                }
                candidates.push(id);
                predicted.push(p.bbox);
            } else if t.status == TrackStatus::Active && t.last_update_frame + 1 == frame {
                // association only between consecutive-frame detections
                candidates.push(id);
                predicted.push(t.last_box().expect("live tracklet has a box"));
            }
        }

        // association
        let boxes: Vec<BBox<T>> = detections.iter().map(|d| d.bbox).collect();
        let assignment = associate(&predicted, &boxes, self.cfg.lambda_iou);
        let mut det_track: Vec<Option<TrackId>> = vec![None; detections.len()];
        for &(ti, di) in &assignment.pairs {
            det_track[di] = Some(candidates[ti]);
        }

        // lifecycle
        let matched: HashMap<TrackId, usize> = assignment
            .pairs
            .iter()
            .map(|&(ti, di)| (candidates[ti], di))
            .collect();
        for &id in &live {
            let t = self.tracklets.get_mut(&id).expect("live tracklet exists");
            match matched.get(&id) {
                Some(&di) => t.step(Some(&detections[di]), frame, self.cfg.t_max)?,
                None => t.step(None, frame, self.cfg.t_max)?,
            }
            if t.status == TrackStatus::Dead {
                self.live.remove(&id);
            }
        }
        let kind = self.predictor_kind();
        for &di in &assignment.unmatched_detections {
            let id = self.ids.next_id();
            self.tracklets.insert(id, Tracklet::new(id, &detections[di], kind));
            self.live.insert(id);
            det_track[di] = Some(id);
            self.stats.tracklets_created += 1;
        }

        // templates
        let mut verifiable_dets = Vec::new();
        for (di, d) in detections.iter().enumerate() {
            if let Some(g) = d.gt_id {
                self.gt.insert(d.det_id, g);
            }
            if self.cfg.fbtr_mode == FbtrMode::Off {
                continue;
            }
            let id = det_track[di].expect("every detection is assigned");
            let class = classify(&d.quality, &self.cfg);
            let t = self.tracklets.get_mut(&id).expect("assigned tracklet exists");
            t.add_template(class, &d.embedding);
            if class.is_enrollable() {
                self.gallery.insert_enrollable(id, &d.embedding);
            }
            if class.is_verifiable() {
                verifiable_dets.push(di);
            }
        }

        // reconnection
        let mut joins_this_frame = Vec::new();
        if self.cfg.fbtr_mode != FbtrMode::Off && !verifiable_dets.is_empty() {
            self.gallery.refresh();
            let mut busy: HashSet<TrackId> = det_track.iter().flatten().copied().collect();
            let mut queries: Vec<(TrackId, usize)> =
                verifiable_dets.iter().map(|&di| (det_track[di].unwrap(), di)).collect();
            queries.sort_unstable();
            for (q, di) in queries {
                let decision = {
                    let t_k = &self.tracklets[&q];
                    try_reconnect(t_k, &self.gallery, &self.cfg, |id| !busy.contains(&id))
                };
                self.stats.queries += 1;
                match decision.outcome {
                    Outcome::Fused(target) => {
                        let event = self.fuse(q, target, frame);
                        det_track[di] = Some(target);
                        busy.insert(target);
                        joins_this_frame.push(event.pair);
                        self.events.push(event);
                        self.stats.fusions += 1;
                    }
                    Outcome::RejectedThreshold => self.stats.rejected_threshold += 1,
                    Outcome::RejectedRankMargin => self.stats.rejected_rank_margin += 1,
                    Outcome::NoCandidates => self.stats.no_candidates += 1,
                }
            }
        }

        // emission and correction
        for (di, d) in detections.iter().enumerate() {
            let id = det_track[di].expect("every detection is assigned");
            self.record.emit(d.det_id, id);
            self.order.push((frame, d.det_id));
        }
        for pair in joins_this_frame {
            self.record.apply_join(pair);
        }
        Ok(())
    }

    fn majority_gt(&self, t: &Tracklet<T>) -> Option<GtId> {
        let mut counts: BTreeMap<GtId, usize> = BTreeMap::new();
        for d in &t.detections {
            if let Some(&g) = self.gt.get(d) {
                *counts.entry(g).or_insert(0) += 1;
            }
        }
        // ties go to the smaller label
        counts
            .into_iter()
            .fold(None, |best: Option<(GtId, usize)>, (g, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((g, c)),
            })
            .map(|(g, _)| g)
    }

    fn fuse(&mut self, absorbed: TrackId, surviving: TrackId, frame: u64) -> JoinEvent {
        let source = self.tracklets.remove(&absorbed).expect("query tracklet exists");
        let absorbed_gt = self.majority_gt(&source);
        let surviving_gt = self.majority_gt(&self.tracklets[&surviving]);
        let target = self.tracklets.get_mut(&surviving).expect("candidate tracklet exists");
        target.absorb(source);
        let now_live = target.is_live();
        self.live.remove(&absorbed);
        if now_live {
            self.live.insert(surviving);
        } else {
            self.live.remove(&surviving);
        }
        self.gallery.merge(absorbed, surviving);
        JoinEvent {
            pair: JoinPair {
                absorbed,
                surviving,
                frame,
            },
            absorbed_gt,
            surviving_gt,
        }
    }

    /// Checks structural invariants; used by tests.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for t in self.tracklets.values() {
            if t.coast_count > self.cfg.t_max {
                return Err(Error::Lifecycle(format!("tracklet {} coasts past t_max", t.id)));
            }
            if t.status == TrackStatus::Active && t.coast_count != 0 {
                return Err(Error::Lifecycle(format!("active tracklet {} has coast count", t.id)));
            }
            if t.is_live() != self.live.contains(&t.id) {
                return Err(Error::Lifecycle(format!("live set out of sync for {}", t.id)));
            }
            for d in &t.detections {
                if !seen.insert(*d) {
                    return Err(Error::Lifecycle(format!("detection {d} owned twice")));
                }
            }
            if !t.enrollables.is_empty() != self.gallery.contains(t.id) {
                return Err(Error::Lifecycle(format!("gallery out of sync for {}", t.id)));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> RunOutput {
        let tracks = self
            .order
            .iter()
            .map(|&(frame, det_id)| TrackOutputRecord {
                frame,
                det_id,
                track_id_emitted: self.record.emitted(det_id).expect("emitted"),
                track_id_corrected: self.record.corrected(det_id).expect("emitted"),
            })
            .collect();
        RunOutput {
            tracks,
            joins: self.record.joins().to_vec(),
            join_events: self.events,
            stats: self.stats,
            gt: self.gt,
        }
    }
}

/// Evaluation input for a track file against labelled detections, using the
/// corrected ids. Both sides must cover the same detections in the same frames.
pub fn label_tracks<T: Real>(tracks: &[TrackOutputRecord], detections: &[Detection<T>]) -> Result<EvalInput> {
    let labels: HashMap<DetId, (u64, Option<GtId>)> =
        detections.iter().map(|d| (d.det_id, (d.frame, d.gt_id))).collect();
    if labels.len() != detections.len() {
        return Err(Error::Evaluation("duplicate detection ids in ground truth".into()));
    }
    let mut covered = HashSet::with_capacity(tracks.len());
    let mut records = Vec::new();
    for r in tracks {
        let Some(&(frame, gt)) = labels.get(&r.det_id) else {
            return Err(Error::Evaluation(format!("detection {} is not in the ground truth", r.det_id)));
        };
        if frame != r.frame {
            return Err(Error::Evaluation(format!(
                "detection {} is in frame {} of the tracks but frame {frame} of the ground truth",
                r.det_id, r.frame
            )));
        }
        if !covered.insert(r.det_id) {
            return Err(Error::Evaluation(format!("detection {} appears twice in the tracks", r.det_id)));
        }
        if let Some(g) = gt {
            records.push(EvalRecord {
                det_id: r.det_id,
                frame,
                gt_id: g,
                track: Some(r.track_id_corrected),
            });
        }
    }
    if covered.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} ground-truth detections have no track",
            labels.len() - covered.len()
        )));
    }
    EvalInput::new(records)
}

/// Groups a frame-sorted detection sequence into `(frame, detections)` batches.
pub fn group_frames<T: Real>(dets: Vec<Detection<T>>) -> Vec<(u64, Vec<Detection<T>>)> {
    let mut out: Vec<(u64, Vec<Detection<T>>)> = Vec::new();
    for d in dets {
        match out.last_mut() {
            Some((f, batch)) if *f == d.frame => batch.push(d),
            _ => out.push((d.frame, vec![d])),
        }
    }
    out
}

/// Runs a whole stream through a fresh tracker.
pub fn run<T: Real>(
    cfg: &Config<T>,
    frames: impl IntoIterator<Item = Result<(u64, Vec<Detection<T>>)>>,
    ghosts: &[GhostTracklet<T>],
) -> Result<RunOutput> {
    let mut tracker = Tracker::new(cfg.clone())?;
    tracker.preload_ghosts(ghosts);
    for item in frames {
        let (frame, dets) = item?;
        tracker.process_frame(frame, &dets)?;
    }
    Ok(tracker.finish())
}
