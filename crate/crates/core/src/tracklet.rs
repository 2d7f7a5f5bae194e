//! Tracklets and their lifecycle.

use serde::{Deserialize, Serialize};

use crate::config::PredictorKind;
use crate::error::{Error, Result};
use crate::motion::{BoxPredictor, Prediction, Predictor};
use crate::quality::QualityClass;
use crate::scalar::Real;
use crate::types::{BBox, DetId, Detection, Embedding, TrackId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Active,
    Coasting,
    Dead,
}

/// Hands out monotonically increasing track ids, starting at 1.
#[derive(Debug, Clone)]
pub struct TrackIdAllocator {
    next: u64,
}

impl Default for TrackIdAllocator {
    fn default() -> Self {
        Self { next: 1 }
    }
}

impl TrackIdAllocator {
    pub fn next_id(&mut self) -> TrackId {
        let id = TrackId(self.next);
        self.next += 1;
        id
    }
}

/// An identity hypothesis: detections plus appearance templates.
#[derive(Debug, Clone)]
pub struct Tracklet<T> {
    pub id: TrackId,
    pub status: TrackStatus,
    pub last_update_frame: u64,
    pub coast_count: u32,
    predictor: Option<Predictor<T>>,
    last_box: Option<BBox<T>>,
    predicted_frame: Option<u64>,
    pub enrollables: Vec<Embedding<T>>,
    pub verifiables: Vec<Embedding<T>>,
    pub detections: Vec<DetId>,
    enroll_sum: Vec<T>,
    verify_sum: Vec<T>,
}

impl<T: Real> Tracklet<T> {
    /// Starts an `Active` tracklet from its first detection. Templates are not
    /// added here; the quality gate decides that separately.
    pub fn new(id: TrackId, detection: &Detection<T>, predictor: PredictorKind) -> Self {
        Self {
            id,
            status: TrackStatus::Active,
            last_update_frame: detection.frame,
            coast_count: 0,
            predictor: Some(Predictor::new(predictor, detection.bbox)),
            last_box: Some(detection.bbox),
            predicted_frame: None,
            enrollables: Vec::new(),
            verifiables: Vec::new(),
            detections: vec![detection.det_id],
            enroll_sum: Vec::new(),
            verify_sum: Vec::new(),
        }
    }

    /// A gallery-only tracklet with no detections or motion state (a distractor).
    pub fn from_templates(
        id: TrackId,
        enrollables: Vec<Embedding<T>>,
        verifiables: Vec<Embedding<T>>,
    ) -> Self {
        let mut t = Self {
            id,
            status: TrackStatus::Dead,
            last_update_frame: 0,
            coast_count: 0,
            predictor: None,
            last_box: None,
            predicted_frame: None,
            enrollables: Vec::new(),
            verifiables: Vec::new(),
            detections: Vec::new(),
            enroll_sum: Vec::new(),
            verify_sum: Vec::new(),
        };
        for e in enrollables {
            accumulate(&mut t.enroll_sum, &e);
            t.enrollables.push(e);
        }
        for v in verifiables {
            accumulate(&mut t.verify_sum, &v);
            t.verifiables.push(v);
        }
        t
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Dead
    }

    pub fn last_box(&self) -> Option<BBox<T>> {
        self.last_box
    }

    /// Advances the motion state to `frame` (once per frame) and returns the predicted box.
    pub fn predict(&mut self, frame: u64) -> Result<Prediction<T>> {
        if self.status == TrackStatus::Dead {
            return Err(Error::Lifecycle(format!("predicting dead tracklet {}", self.id)));
        }
        let p = self
            .predictor
            .as_mut()
            .ok_or_else(|| Error::Lifecycle(format!("tracklet {} has no motion state", self.id)))?;
        if self.predicted_frame == Some(frame) {
            return Ok(Prediction {
                bbox: p.estimate(),
                clamped: false,
            });
        }
        self.predicted_frame = Some(frame);
        Ok(p.predict())
    }

    /// One lifecycle step at `frame`.
    ///
    /// With a detection the tracklet becomes `Active`; without one it coasts,
    /// and dies once it would exceed `t_max` consecutive misses.
    pub fn step(&mut self, assigned: Option<&Detection<T>>, frame: u64, t_max: u32) -> Result<()> {
        if self.status == TrackStatus::Dead {
            return Err(Error::Lifecycle(format!("stepping dead tracklet {}", self.id)));
        }
        self.predict(frame)?;
        match assigned {
            Some(d) => {
                if let Some(p) = self.predictor.as_mut() {
                    p.correct(&d.bbox);
                }
                self.last_box = Some(d.bbox);
                self.detections.push(d.det_id);
                self.status = TrackStatus::Active;
                self.coast_count = 0;
                self.last_update_frame = frame;
            }
            None => {
                if self.coast_count >= t_max {
                    self.status = TrackStatus::Dead;
                } else {
                    self.coast_count += 1;
                    self.status = TrackStatus::Coasting;
                }
            }
        }
        Ok(())
    }

    /// Stores the detection's embedding according to its quality class.
    /// Enrollable faces feed both stores.
    pub fn add_template(&mut self, class: QualityClass, embedding: &Embedding<T>) {
        if class.is_enrollable() {
            accumulate(&mut self.enroll_sum, embedding);
            self.enrollables.push(embedding.clone());
        }
        if class.is_verifiable() {
            accumulate(&mut self.verify_sum, embedding);
            self.verifiables.push(embedding.clone());
        }
    }

    /// Running sum of enrollable templates (empty when there are none).
    pub fn enrollable_sum(&self) -> &[T] {
        &self.enroll_sum
    }

    pub fn verifiable_sum(&self) -> &[T] {
        &self.verify_sum
    }

    /// Moves everything `other` owns into `self`, keeping `self.id`.
    ///
    /// The motion and lifecycle state of `other` win: it is the tracklet that
    /// holds the current detection.
    pub(crate) fn absorb(&mut self, other: Tracklet<T>) {
        self.status = other.status;
        self.last_update_frame = other.last_update_frame;
        self.coast_count = other.coast_count;
        self.predictor = other.predictor;
        self.last_box = other.last_box;
        self.predicted_frame = other.predicted_frame;
        self.detections.extend(other.detections);
        self.detections.sort_unstable();
        add_sum(&mut self.enroll_sum, &other.enroll_sum);
        add_sum(&mut self.verify_sum, &other.verify_sum);
        self.enrollables.extend(other.enrollables);
        self.verifiables.extend(other.verifiables);
    }
}

fn accumulate<T: Real>(sum: &mut Vec<T>, e: &Embedding<T>) {
    add_sum(sum, e.values());
}

fn add_sum<T: Real>(sum: &mut Vec<T>, v: &[T]) {
    if v.is_empty() {
        return;
    }
    if sum.is_empty() {
        sum.extend_from_slice(v);
    } else {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s = *s + x;
        }
    }
}
