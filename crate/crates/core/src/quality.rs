//! Quality gate: which detections may contribute appearance templates.

use serde::{Deserialize, Serialize};

use crate::config::{Config, QualityThresholds};
use crate::scalar::Real;
use crate::types::QualityAttrs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityClass {
    Discarded,
    Verifiable,
    Enrollable,
}

impl QualityClass {
    pub fn is_verifiable(self) -> bool {
        self >= QualityClass::Verifiable
    }

    pub fn is_enrollable(self) -> bool {
        self == QualityClass::Enrollable
    }
}

fn passes<T: Real>(q: &QualityAttrs<T>, t: &QualityThresholds<T>) -> bool {
    q.det_confidence >= t.min_confidence
        && q.max_abs_angle() <= t.max_abs_angle
        && q.sharpness >= t.min_sharpness
}

/// Enrollable requires both bound sets, so an enrollable face is always verifiable
/// even under a configuration whose enroll bounds are looser than the verify ones.
pub fn classify<T: Real>(q: &QualityAttrs<T>, cfg: &Config<T>) -> QualityClass {
    if !passes(q, &cfg.verify) {
        QualityClass::Discarded
    } else if passes(q, &cfg.enroll) {
        QualityClass::Enrollable
    } else {
        QualityClass::Verifiable
    }
}
