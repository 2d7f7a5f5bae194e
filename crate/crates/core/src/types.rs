//! Domain types: identifiers, boxes, embeddings, quality attributes, detections.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// Track identifier. Allocated monotonically by the tracker.
    TrackId
);
id_newtype!(
    /// Detection identifier, unique within a run.
    DetId
);
id_newtype!(
    /// Ground-truth identity label.
    GtId
);

/// Axis-aligned box in pixels: `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinates ({x}, {y}, {w}, {h})")));
        }
        if w <= T::zero() || h <= T::zero() {
            return Err(Error::InvalidBox(format!("non-positive size {w}x{h}")));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(cx - w / two, cy - h / two, w, h)
    }

    pub fn center(&self) -> (T, T) {
        let two = T::lit(2.0);
        (self.x + self.w / two, self.y + self.h / two)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= T::zero() || ih <= T::zero() {
            T::zero()
        } else {
            iw * ih
        }
    }

    pub fn contains_point(&self, px: T, py: T) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    pub fn cast<U: Real>(&self) -> BBox<U> {
        BBox {
            x: U::lit(self.x.to_f64_lossy()),
            y: U::lit(self.y.to_f64_lossy()),
            w: U::lit(self.w.to_f64_lossy()),
            h: U::lit(self.h.to_f64_lossy()),
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Unit-norm appearance embedding. Normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Real> Embedding<T> {
    /// Normalizes `raw` to unit L2 norm. Rejects empty, non-finite and zero vectors.
    pub fn new(raw: Vec<T>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidEmbedding("empty vector".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding("non-finite component".into()));
        }
        let norm = l2_norm(&raw);
        if norm <= T::zero() || !norm.is_finite() {
            return Err(Error::InvalidEmbedding("zero norm".into()));
        }
        Ok(Self {
            values: raw.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Like [`Embedding::new`], but keeps `raw` unchanged when its norm is
    /// already within `1e-6` of one. Readers use it so that stored vectors
    /// survive a read unaltered.
    pub fn from_unit(raw: Vec<T>) -> Result<Self> {
        let norm = l2_norm(&raw);
        if raw.iter().all(|v| v.is_finite()) && (norm - T::one()).abs() <= T::lit(1e-6) {
            return Ok(Self { values: raw });
        }
        Self::new(raw)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    pub fn cast<U: Real>(&self) -> Embedding<U> {
        Embedding {
            values: self.values.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn l2_norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Per-detection quality indicators. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityAttrs<T> {
    pub det_confidence: T,
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
    pub sharpness: T,
}

impl<T: Real> QualityAttrs<T> {
    pub fn new(det_confidence: T, yaw: T, pitch: T, roll: T, sharpness: T) -> Result<Self> {
        let q = Self {
            det_confidence,
            yaw,
            pitch,
            roll,
            sharpness,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.det_confidence, self.yaw, self.pitch, self.roll, self.sharpness];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuality("non-finite field".into()));
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.det_confidence) {
            return Err(Error::InvalidQuality(format!(
                "detection confidence {} outside [0,1]",
                self.det_confidence
            )));
        }
        if !unit(self.sharpness) {
            return Err(Error::InvalidQuality(format!(
                "sharpness {} outside [0,1]",
                self.sharpness
            )));
        }
        Ok(())
    }

    /// Largest absolute head-pose angle.
    pub fn max_abs_angle(&self) -> T {
        self.yaw.abs().max(self.pitch.abs()).max(self.roll.abs())
    }
}

/// One observed face instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub det_id: DetId,
    pub frame: u64,
    pub bbox: BBox<T>,
    pub embedding: Embedding<T>,
    pub quality: QualityAttrs<T>,
    pub gt_id: Option<GtId>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_normalized() {
        let e = Embedding::new(vec![3.0f64, 4.0]).unwrap();
        assert!((e.values()[0] - 0.6).abs() < 1e-12);
        assert!((l2_norm(e.values()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_embedding_rejected() {
        assert!(Embedding::new(vec![0.0f32; 4]).is_err());
        assert!(Embedding::<f64>::new(vec![]).is_err());
        assert!(Embedding::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::new(f64::INFINITY, 0.0, 1.0, 1.0).is_err());
        let b = BBox::from_center(5.0, 5.0, 2.0, 4.0).unwrap();
        assert_eq!(b.to_array(), [4.0, 3.0, 2.0, 4.0]);
        assert_eq!(b.center(), (5.0, 5.0));
    }

    #[test]
    fn quality_bounds() {
        assert!(QualityAttrs::new(1.2f64, 0.0, 0.0, 0.0, 0.5).is_err());
        assert!(QualityAttrs::new(0.9f64, 0.0, 0.0, 0.0, -0.1).is_err());
        let q = QualityAttrs::new(0.9f64, -40.0, 10.0, 5.0, 0.5).unwrap();
        assert_eq!(q.max_abs_angle(), 40.0);
    }
}
