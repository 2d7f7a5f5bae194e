//! Run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which reconnection rule runs after data association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FbtrMode {
    Off,
    /// Threshold test only, against `lambda_s_fbtr`.
    Simplified,
    /// Threshold test against `lambda_fbtr` plus the rank-margin test.
    #[default]
    RankBased,
}

/// Box-state predictor used to bridge detector misses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Static,
    ConstantVelocity,
    #[default]
    KalmanCv,
}

/// Inclusive quality bounds for one quality class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityThresholds<T> {
    pub min_confidence: T,
    /// Bound applied to |yaw|, |pitch| and |roll| alike.
    pub max_abs_angle: T,
    pub min_sharpness: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config<T> {
    pub lambda_iou: T,
    pub lambda_fbtr: T,
    pub lambda_s_fbtr: T,
    pub epsilon: T,
    /// Number of competitors averaged by the rank-margin test.
    pub rank_c: usize,
    /// Frames a tracklet may coast without a detection before it dies.
    pub t_max: u32,
    pub enroll: QualityThresholds<T>,
    pub verify: QualityThresholds<T>,
    pub fbtr_mode: FbtrMode,
    pub tm_enabled: bool,
    pub cm_enabled: bool,
    pub predictor: PredictorKind,
}

impl<T: Real> Default for Config<T> {
    fn default() -> Self {
        Self {
            lambda_iou: T::lit(0.25),
            lambda_fbtr: T::lit(0.5),
            lambda_s_fbtr: T::lit(0.7),
            epsilon: T::lit(0.8),
            rank_c: 6,
            t_max: 30,
            enroll: QualityThresholds {
                min_confidence: T::lit(0.95),
                max_abs_angle: T::lit(25.0),
                min_sharpness: T::lit(0.9),
            },
            verify: QualityThresholds {
                min_confidence: T::lit(0.8),
                max_abs_angle: T::lit(60.0),
                min_sharpness: T::lit(0.75),
            },
            fbtr_mode: FbtrMode::RankBased,
            tm_enabled: true,
            cm_enabled: true,
            predictor: PredictorKind::KalmanCv,
        }
    }
}

impl<T: Real> Config<T> {
    /// Defaults with both reconnection thresholds read as cosine thresholds and
    /// mapped onto the `(1 + cos) / 2` similarity scale used by [`crate::reconnect::similarity`].
    ///
    /// On that scale two unrelated embeddings score about 0.5, so a raw 0.5
    /// threshold admits roughly half of all impostor pairs.
    pub fn cosine_calibrated() -> Self {
        let half = T::lit(0.5);
        let d = Self::default();
        Self {
            lambda_fbtr: half * (T::one() + d.lambda_fbtr),
            lambda_s_fbtr: half * (T::one() + d.lambda_s_fbtr),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda_iou >= T::zero() && self.lambda_iou <= T::one()) {
            return bad(format!("lambda_iou {} outside [0,1]", self.lambda_iou));
        }
        if !(self.lambda_fbtr >= T::zero() && self.lambda_fbtr <= T::one()) {
            return bad(format!("lambda_fbtr {} outside [0,1]", self.lambda_fbtr));
        }
        if !(self.lambda_s_fbtr >= T::zero() && self.lambda_s_fbtr <= T::one()) {
            return bad(format!("lambda_s_fbtr {} outside [0,1]", self.lambda_s_fbtr));
        }
        if !(self.epsilon > T::zero() && self.epsilon <= T::one()) {
            return bad(format!("epsilon {} outside (0,1]", self.epsilon));
        }
        if self.rank_c < 1 {
            return bad("rank_c must be at least 1".into());
        }
        if self.t_max < 1 {
            return bad("t_max must be at least 1".into());
        }
        if self.cm_enabled && self.fbtr_mode == FbtrMode::Off {
            return bad("the correction module needs reconnection (fbtr) enabled".into());
        }
        for (name, q) in [("enroll", &self.enroll), ("verify", &self.verify)] {
            let vals = [q.min_confidence, q.max_abs_angle, q.min_sharpness];
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} thresholds must be finite"));
            }
        }
        Ok(())
    }

    /// Same configuration on another scalar type.
    pub fn cast<U: Real>(&self) -> Config<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        let q = |t: &QualityThresholds<T>| QualityThresholds {
            min_confidence: c(t.min_confidence),
            max_abs_angle: c(t.max_abs_angle),
            min_sharpness: c(t.min_sharpness),
        };
        Config {
            lambda_iou: c(self.lambda_iou),
            lambda_fbtr: c(self.lambda_fbtr),
            lambda_s_fbtr: c(self.lambda_s_fbtr),
            epsilon: c(self.epsilon),
            rank_c: self.rank_c,
            t_max: self.t_max,
            enroll: q(&self.enroll),
            verify: q(&self.verify),
            fbtr_mode: self.fbtr_mode,
            tm_enabled: self.tm_enabled,
            cm_enabled: self.cm_enabled,
            predictor: self.predictor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::<f64>::default();
        c.validate().unwrap();
        assert_eq!(c.lambda_iou, 0.25);
        assert_eq!(c.lambda_fbtr, 0.5);
        assert_eq!(c.lambda_s_fbtr, 0.7);
        assert_eq!(c.epsilon, 0.8);
        assert_eq!(c.rank_c, 6);
        Config::<f32>::cosine_calibrated().validate().unwrap();
    }

    #[test]
    fn calibrated_thresholds() {
        let c = Config::<f64>::cosine_calibrated();
        assert!((c.lambda_fbtr - 0.75).abs() < 1e-12);
        assert!((c.lambda_s_fbtr - 0.85).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut c = Config::<f64>::default();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        let mut c = Config::<f64>::default();
        c.rank_c = 0;
        assert!(c.validate().is_err());
        let mut c = Config::<f64>::default();
        c.lambda_fbtr = 1.5;
        assert!(c.validate().is_err());
        let mut c = Config::<f64>::default();
        c.t_max = 0;
        assert!(c.validate().is_err());
        let mut c = Config::<f64>::default();
        c.fbtr_mode = FbtrMode::Off;
        assert!(c.validate().is_err(), "cm without fbtr");
        c.cm_enabled = false;
        c.validate().unwrap();
    }
}
