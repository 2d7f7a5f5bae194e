//! Retroactive relabeling of absorbed tracklets.
//!
//! Every detection keeps the id it was emitted with. Joins are recorded in a
//! union-find over track ids whose roots are always the surviving ids, so the
//! corrected id of a detection is the root of its emitted id. The eager
//! variant rewrites labels in place and exists to cross-check the lazy one.

use std::collections::HashMap;

use log::{debug, warn};

use crate::reconnect::JoinPair;
use crate::types::{DetId, TrackId};

/// Assignment history: emitted id per detection, plus the join log.
#[derive(Debug, Clone)]
pub struct TrackRecord {
    correct: bool,
    order: Vec<DetId>,
    emitted: HashMap<DetId, TrackId>,
    parent: HashMap<TrackId, TrackId>,
    // number of detections whose corrected id is the key (roots only)
    members: HashMap<TrackId, usize>,
    joins: Vec<JoinPair>,
}

impl TrackRecord {
    /// `correct = false` keeps the join log but never relabels anything.
    pub fn new(correct: bool) -> Self {
        Self {
            correct,
            order: Vec::new(),
            emitted: HashMap::new(),
            parent: HashMap::new(),
            members: HashMap::new(),
            joins: Vec::new(),
        }
    }

    pub fn corrects(&self) -> bool {
        self.correct
    }

    /// Records the id a detection was assigned when its frame was processed.
    pub fn emit(&mut self, det: DetId, track: TrackId) {
        if let Some(prev) = self.emitted.insert(det, track) {
            warn!("detection {det} re-emitted (was {prev}, now {track})");
            let root = self.find(prev);
            if let Some(c) = self.members.get_mut(&root) {
                *c -= 1;
            }
        } else {
            self.order.push(det);
        }
        let root = self.find(track);
        *self.members.entry(root).or_insert(0) += 1;
    }

    /// Relabels every detection currently carrying `pair.absorbed` to `pair.surviving`.
    ///
    /// Unknown or already absorbed ids leave the record unchanged.
    pub fn apply_join(&mut self, pair: JoinPair) {
        self.joins.push(pair);
        if !self.correct {
            return;
        }
        self.union(pair);
    }

    fn union(&mut self, pair: JoinPair) {
        if pair.absorbed == pair.surviving {
            return;
        }
        if self.find(pair.absorbed) != pair.absorbed {
            // already merged away; its detections moved with it
            return;
        }
        let count = self.members.get(&pair.absorbed).copied().unwrap_or(0);
        if count == 0 {
            debug!("join {} -> {}: no detections carry the absorbed id", pair.absorbed, pair.surviving);
            return;
        }
        let root = self.find(pair.surviving);
        if root == pair.absorbed {
            return;
        }
        self.parent.insert(pair.absorbed, root);
        self.members.remove(&pair.absorbed);
        *self.members.entry(root).or_insert(0) += count;
    }

    fn find(&mut self, id: TrackId) -> TrackId {
        let mut root = id;
        while let Some(&p) = self.parent.get(&root) {
            root = p;
        }
        let mut cur = id;
        while let Some(&p) = self.parent.get(&cur) {
            if p == root {
                break;
            }
            self.parent.insert(cur, root);
            cur = p;
        }
        root
    }

    fn resolve(&self, id: TrackId) -> TrackId {
        let mut root = id;
        while let Some(&p) = self.parent.get(&root) {
            root = p;
        }
        root
    }

    pub fn emitted(&self, det: DetId) -> Option<TrackId> {
        self.emitted.get(&det).copied()
    }

    pub fn corrected(&self, det: DetId) -> Option<TrackId> {
        self.emitted(det).map(|t| self.resolve(t))
    }

    pub fn joins(&self) -> &[JoinPair] {
        &self.joins
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `(detection, emitted id, corrected id)` in emission order.
    pub fn entries(&self) -> impl Iterator<Item = (DetId, TrackId, TrackId)> + '_ {
        self.order.iter().map(move |&d| {
            let e = self.emitted[&d];
            (d, e, self.resolve(e))
        })
    }
}

/// Eager relabeling: scans every label on each join. Linear in the record size.
#[derive(Debug, Clone, Default)]
pub struct EagerRecord {
    labels: Vec<(DetId, TrackId)>,
}

impl EagerRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn emit(&mut self, det: DetId, track: TrackId) {
        self.labels.push((det, track));
    }

    pub fn apply_join(&mut self, pair: JoinPair) {
        for (_, t) in self.labels.iter_mut() {
            if *t == pair.absorbed {
                *t = pair.surviving;
            }
        }
    }

    pub fn labels(&self) -> &[(DetId, TrackId)] {
        &self.labels
    }
}
