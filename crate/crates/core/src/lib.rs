//! Long-term multi-identity tracking by detection.
//!
//! Detections are linked frame to frame by IOU-cost Hungarian assignment,
//! gaps are bridged by a box predictor, tracklets broken by long occlusions
//! are reconnected by comparing averaged appearance templates under a
//! threshold and a rank-margin rule, and reconnections can retroactively
//! relabel earlier output. Long-term metrics, a synthetic scene generator and
//! the reconnection parameter study come with it.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, with `*32` variants for `f32`.

pub mod assoc;
pub mod bench;
pub mod config;
pub mod correction;
pub mod error;
pub mod hungarian;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod quality;
pub mod reconnect;
pub mod scalar;
pub mod sim;
pub mod study;
pub mod tracklet;
pub mod types;

pub use config::{FbtrMode, PredictorKind};
pub use error::{Error, Result};
pub use metrics::{evaluate, EvalInput, EvalRecord, EvalReport};
pub use pipeline::{RunOutput, TrackOutputRecord};
pub use quality::QualityClass;
pub use reconnect::{JoinPair, Outcome};
pub use scalar::Real;
pub use tracklet::TrackStatus;
pub use types::{DetId, GtId, TrackId};

pub type BBox = types::BBox<f64>;
pub type Embedding = types::Embedding<f64>;
pub type QualityAttrs = types::QualityAttrs<f64>;
pub type Detection = types::Detection<f64>;
pub type Config = config::Config<f64>;
pub type Tracklet = tracklet::Tracklet<f64>;
pub type Gallery = reconnect::Gallery<f64>;
pub type Tracker = pipeline::Tracker<f64>;
pub type GhostTracklet = sim::GhostTracklet<f64>;
pub type Scene = sim::Scene<f64>;

pub type BBox32 = types::BBox<f32>;
pub type Embedding32 = types::Embedding<f32>;
pub type QualityAttrs32 = types::QualityAttrs<f32>;
pub type Detection32 = types::Detection<f32>;
pub type Config32 = config::Config<f32>;
pub type Tracklet32 = tracklet::Tracklet<f32>;
pub type Gallery32 = reconnect::Gallery<f32>;
pub type Tracker32 = pipeline::Tracker<f32>;
pub type GhostTracklet32 = sim::GhostTracklet<f32>;
pub type Scene32 = sim::Scene<f32>;
