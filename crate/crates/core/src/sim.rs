//! Synthetic crowded-scene generator.
//!
//! Identities carry a latent unit embedding and walk waypoint trajectories
//! during one or more presence windows. Each frame a present identity yields a
//! detection unless its box center sits inside an active occluder or the
//! detector drops it. Quality attributes follow occlusion overlap, heading and
//! apparent size, and the observed embedding gets noisier as quality drops.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EvalInput, EvalRecord};
use crate::scalar::Real;
use crate::types::{BBox, DetId, Detection, Embedding, GtId, QualityAttrs, TrackId};

const LATENT_STREAM: u64 = 1;
const OBSERVATION_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Presence {
    pub start: u64,
    /// Last frame of the window, inclusive.
    pub end: u64,
    /// Face-center path in pixels, traversed at constant speed over the window.
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityProfile {
    pub confidence: f64,
    pub sharpness: f64,
    /// Standard deviation of per-frame pose noise, degrees.
    pub pose_jitter: f64,
    pub yaw_bias: f64,
}

impl Default for QualityProfile {
    fn default() -> Self {
        Self {
            confidence: 0.98,
            sharpness: 0.96,
            pose_jitter: 6.0,
            yaw_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityScript {
    pub gt_id: u64,
    pub presences: Vec<Presence>,
    #[serde(default = "default_face_size")]
    pub face_size: f64,
    #[serde(default)]
    pub quality: QualityProfile,
}

fn default_face_size() -> f64 {
    48.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occluder {
    /// `[x, y, w, h]`.
    pub rect: [f64; 4],
    pub from: u64,
    /// Inclusive.
    pub to: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub sigma_e: f64,
    pub sigma_b: f64,
    pub p_miss: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma_e: 0.5,
            sigma_b: 1.0,
            p_miss: 0.02,
        }
    }
}

/// Identities whose latents share a common component, giving pairwise
/// expected similarity `similarity` on the `(1 + cos) / 2` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusableGroup {
    pub members: Vec<u64>,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneScript {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub frame_count: u64,
    /// `[width, height]`.
    pub frame_rect: [f64; 2],
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    pub identities: Vec<IdentityScript>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub confusable_groups: Vec<ConfusableGroup>,
}

fn default_dim() -> usize {
    128
}

impl SceneScript {
    pub fn num_identities(&self) -> usize {
        self.identities.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScript(m));
        if self.frame_count == 0 {
            return bad("frame_count must be positive".into());
        }
        if !(self.frame_rect[0] > 0.0 && self.frame_rect[1] > 0.0) {
            return bad("frame_rect must be positive".into());
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be at least 2".into());
        }
        let n = &self.noise;
        if !(n.sigma_e >= 0.0 && n.sigma_b >= 0.0 && n.sigma_e.is_finite() && n.sigma_b.is_finite()) {
            return bad("noise scales must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&n.p_miss) {
            return bad(format!("p_miss {} outside [0, 1)", n.p_miss));
        }
        let mut ids = BTreeSet::new();
        for ident in &self.identities {
            if !ids.insert(ident.gt_id) {
                return bad(format!("duplicate identity {}", ident.gt_id));
            }
            if !(ident.face_size > 0.0) {
                return bad(format!("identity {}: face_size must be positive", ident.gt_id));
            }
            let q = &ident.quality;
            if !((0.0..=1.0).contains(&q.confidence) && (0.0..=1.0).contains(&q.sharpness)) {
                return bad(format!("identity {}: quality profile outside [0, 1]", ident.gt_id));
            }
            if ident.presences.is_empty() {
                return bad(format!("identity {} has no presence window", ident.gt_id));
            }
            let mut windows: Vec<&Presence> = ident.presences.iter().collect();
            windows.sort_by_key(|p| p.start);
            for p in &windows {
                if p.start >= p.end {
                    return bad(format!("identity {}: entry {} not before exit {}", ident.gt_id, p.start, p.end));
                }
                if p.end >= self.frame_count {
                    return bad(format!("identity {}: exit {} past the last frame", ident.gt_id, p.end));
                }
                if p.waypoints.is_empty() || p.waypoints.iter().flatten().any(|v| !v.is_finite()) {
                    return bad(format!("identity {}: invalid waypoints", ident.gt_id));
                }
            }
            for w in windows.windows(2) {
                if w[1].start <= w[0].end {
                    return bad(format!("identity {}: overlapping presence windows", ident.gt_id));
                }
            }
        }
        for o in &self.occluders {
            if !(o.rect[2] > 0.0 && o.rect[3] > 0.0) || o.from > o.to {
                return bad("occluder needs a positive size and from <= to".into());
            }
        }
        for g in &self.confusable_groups {
            if !(0.5..=1.0).contains(&g.similarity) {
                return bad(format!("group similarity {} outside [0.5, 1]", g.similarity));
            }
            for m in &g.members {
                if !ids.contains(m) {
                    return bad(format!("group member {m} is not an identity"));
                }
            }
        }
        Ok(())
    }
}

/// Generated stream plus ground truth.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub detections: Vec<Detection<T>>,
    pub latents: BTreeMap<GtId, Embedding<T>>,
    pub frame_count: u64,
}

impl<T: Real> Scene<T> {
    /// Perfect tracking: every detection labelled with its own identity.
    pub fn ground_truth(&self) -> EvalInput {
        EvalInput {
            records: self
                .detections
                .iter()
                .filter_map(|d| {
                    d.gt_id.map(|g| EvalRecord {
                        det_id: d.det_id,
                        frame: d.frame,
                        gt_id: g,
                        track: Some(TrackId(g.0)),
                    })
                })
                .collect(),
        }
    }
}

/// Template-only tracklet: a distractor preloaded into the gallery, or an
/// entry of a study database. `identity` is `None` for mixed tracklets.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateTracklet<T> {
    pub id: u64,
    pub identity: Option<GtId>,
    pub enrollables: Vec<Embedding<T>>,
    pub verifiables: Vec<Embedding<T>>,
}

pub type GhostTracklet<T> = TemplateTracklet<T>;

pub(crate) fn gaussian_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform on the unit sphere.
pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `normalize(latent + scale * g)` with `g` an isotropic gaussian of expected norm 1.
pub fn noisy_observation(rng: &mut impl Rng, latent: &[f64], scale: f64) -> Vec<f64> {
    let k = scale / (latent.len() as f64).sqrt();
    let g = gaussian_vec(rng, latent.len());
    let v: Vec<f64> = latent.iter().zip(&g).map(|(l, x)| l + k * x).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1e-12 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        latent.to_vec()
    }
}

/// Latents for a look-alike family: pairwise cosine close to `2 * similarity - 1`.
pub fn confusable_latents(rng: &mut impl Rng, dim: usize, count: usize, similarity: f64) -> Vec<Vec<f64>> {
    let rho = (2.0 * similarity - 1.0).clamp(0.0, 1.0);
    let base = random_unit(rng, dim);
    (0..count)
        .map(|_| {
            let u = random_unit(rng, dim);
            normalized(
                base.iter()
                    .zip(&u)
                    .map(|(b, x)| rho.sqrt() * b + (1.0 - rho).sqrt() * x)
                    .collect(),
            )
        })
        .collect()
}

fn latents_for(script: &SceneScript) -> BTreeMap<u64, Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    rng.set_stream(LATENT_STREAM);
    let dim = script.embedding_dim;
    let mut out = BTreeMap::new();
    for ident in &script.identities {
        out.insert(ident.gt_id, random_unit(&mut rng, dim));
    }
    for g in &script.confusable_groups {
        let fam = confusable_latents(&mut rng, dim, g.members.len(), g.similarity);
        for (m, l) in g.members.iter().zip(fam) {
            out.insert(*m, l);
        }
    }
    out
}

/// Position and velocity (pixels per frame) at `frame` within a window.
fn position(p: &Presence, frame: u64) -> ([f64; 2], [f64; 2]) {
    let pts = &p.waypoints;
    if pts.len() == 1 {
        return (pts[0], [0.0, 0.0]);
    }
    let seg: Vec<f64> = pts
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let total: f64 = seg.iter().sum();
    let span = (p.end - p.start) as f64;
    if total <= 0.0 {
        return (pts[0], [0.0, 0.0]);
    }
    let speed = total / span;
    let mut d = (frame - p.start) as f64 * speed;
    for (i, &len) in seg.iter().enumerate() {
        if d <= len || i == seg.len() - 1 {
            let t = if len > 0.0 { (d / len).min(1.0) } else { 0.0 };
            let a = pts[i];
            let b = pts[i + 1];
            let pos = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let vel = if len > 0.0 {
                [(b[0] - a[0]) / len * speed, (b[1] - a[1]) / len * speed]
            } else {
                [0.0, 0.0]
            };
            return (pos, vel);
        }
        d -= len;
    }
    unreachable!("segment walk always returns")
}

fn overlap_fraction(b: &BBox<f64>, rect: &[f64; 4]) -> f64 {
    let o = BBox {
        x: rect[0],
        y: rect[1],
        w: rect[2],
        h: rect[3],
    };
    b.intersection_area(&o) / b.area()
}

/// Generates the detection stream of a script. Deterministic in `script.seed`.
pub fn generate<T: Real>(script: &SceneScript) -> Result<Scene<T>> {
    script.validate()?;
    let latents = latents_for(script);
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    rng.set_stream(OBSERVATION_STREAM);
    let [fw, fh] = script.frame_rect;
    let noise = &script.noise;
    let mut detections = Vec::new();
    let mut next_det = 0u64;

    for frame in 0..script.frame_count {
        let active: Vec<&Occluder> =
            script.occluders.iter().filter(|o| o.from <= frame && frame <= o.to).collect();
        for ident in &script.identities {
            let Some(p) = ident.presences.iter().find(|p| p.start <= frame && frame <= p.end) else {
                continue;
            };
            let (pos, vel) = position(p, frame);
            // draws happen for every present identity so suppression does not
            // shift the random sequence of the others
            let jitter: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let pose: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let q_noise: [f64; 2] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let dropped = rng.random::<f64>() < noise.p_miss;
            let latent = &latents[&ident.gt_id];
            let k = 1.0 / (latent.len() as f64).sqrt();
            let g = gaussian_vec(&mut rng, latent.len());

            if dropped || !(0.0..fw).contains(&pos[0]) || !(0.0..fh).contains(&pos[1]) {
                continue;
            }
            if active.iter().any(|o| {
                pos[0] >= o.rect[0]
                    && pos[0] <= o.rect[0] + o.rect[2]
                    && pos[1] >= o.rect[1]
                    && pos[1] <= o.rect[1] + o.rect[3]
            }) {
                continue;
            }

            // apparent size grows toward the bottom of the frame
            let depth = 0.6 + 0.8 * (pos[1] / fh);
            let h = (ident.face_size * depth + 0.5 * noise.sigma_b * jitter[2]).max(4.0);
            let w = 0.8 * h;
            let cx = pos[0] + noise.sigma_b * jitter[0];
            let cy = pos[1] + noise.sigma_b * jitter[1];
            let bbox = BBox::from_center(cx, cy, w, h)?;

            // occluder cover or truncation by the frame border, whichever is worse
            let truncated = 1.0 - overlap_fraction(&bbox, &[0.0, 0.0, fw, fh]);
            let overlap = active
                .iter()
                .map(|o| overlap_fraction(&bbox, &o.rect))
                .fold(truncated, f64::max);
            let qp = &ident.quality;
            let speed = (vel[0] * vel[0] + vel[1] * vel[1]).sqrt();
            let yaw = qp.yaw_bias + 60.0 * vel[0] / (speed + 3.0) + qp.pose_jitter * pose[0];
            let pitch = 0.5 * qp.pose_jitter * pose[1];
            let roll = 0.5 * qp.pose_jitter * pose[2];
            let conf = (qp.confidence * (1.0 - 0.6 * overlap) + 0.01 * q_noise[0]).clamp(0.0, 1.0);
            let far = (1.0 - depth).max(0.0);
            let sharp = (qp.sharpness - 0.3 * far + 0.01 * q_noise[1]).clamp(0.0, 1.0);
            let quality = QualityAttrs::new(conf, yaw, pitch, roll, sharp)?;

            let penalty = 2.0 * overlap
                + (quality.max_abs_angle() - 25.0).max(0.0) / 35.0
                + 4.0 * (0.9 - sharp).max(0.0)
                + 4.0 * (0.95 - conf).max(0.0);
            let scale = noise.sigma_e * (1.0 + penalty) * k;
            let raw: Vec<f64> = latent.iter().zip(&g).map(|(l, x)| l + scale * x).collect();
            let embedding = Embedding::new(raw)?;

            detections.push(Detection {
                det_id: DetId(next_det),
                frame,
                bbox: bbox.cast(),
                embedding: embedding.cast(),
                quality: QualityAttrs {
                    det_confidence: T::lit(quality.det_confidence),
                    yaw: T::lit(quality.yaw),
                    pitch: T::lit(quality.pitch),
                    roll: T::lit(quality.roll),
                    sharpness: T::lit(quality.sharpness),
                },
                gt_id: Some(GtId(ident.gt_id)),
            });
            next_det += 1;
        }
    }

    let latents = latents
        .into_iter()
        .map(|(g, v)| Ok((GtId(g), Embedding::new(v)?.cast())))
        .collect::<Result<_>>()?;
    Ok(Scene {
        detections,
        latents,
        frame_count: script.frame_count,
    })
}

/// Offset applied to ghost ids so they never collide with scene identities.
pub const GHOST_ID_BASE: u64 = 1_000_000_000;

/// `n` distractors with latents uniform on the sphere. Each carries
/// `per_ghost_enrollables` enrollable templates, which also count as
/// verifiable, plus as many extra verifiable ones.
pub fn make_ghosts<T: Real>(
    n: usize,
    per_ghost_enrollables: usize,
    dim: usize,
    sigma_e: f64,
    seed: u64,
) -> Result<Vec<GhostTracklet<T>>> {
    if per_ghost_enrollables == 0 && n > 0 {
        return Err(Error::InvalidConfig("ghosts need at least one enrollable".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidConfig("embedding dimension must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let latent = random_unit(&mut rng, dim);
            let enrollables = (0..per_ghost_enrollables)
                .map(|_| Embedding::new(noisy_observation(&mut rng, &latent, sigma_e)).map(|e| e.cast()))
                .collect::<Result<Vec<_>>>()?;
            let mut verifiables = enrollables.clone();
            for _ in 0..per_ghost_enrollables {
                verifiables.push(Embedding::new(noisy_observation(&mut rng, &latent, 1.5 * sigma_e))?.cast());
            }
            Ok(TemplateTracklet {
                id: GHOST_ID_BASE + i as u64,
                identity: None,
                enrollables,
                verifiables,
            })
        })
        .collect()
}

/// Parameters of a synthetic study database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbParams {
    pub identities: usize,
    /// Tracklet lengths are drawn uniformly from this inclusive range.
    pub templates_range: [usize; 2],
    pub dim: usize,
    /// Per-identity noise scale is drawn uniformly from this range.
    pub sigma_range: [f64; 2],
    /// Number of look-alike pairs.
    pub lookalike_pairs: usize,
    pub lookalike_similarity: f64,
}

impl Default for DbParams {
    fn default() -> Self {
        Self {
            identities: 100,
            templates_range: [10, 60],
            dim: 128,
            sigma_range: [1.2, 3.5],
            lookalike_pairs: 30,
            lookalike_similarity: 0.8,
        }
    }
}

/// A pure study database: one tracklet per identity, templates in temporal order.
pub fn template_db<T: Real>(params: &DbParams, seed: u64) -> Result<Vec<TemplateTracklet<T>>> {
    let [tmin, tmax] = params.templates_range;
    if params.identities < 2 || tmin == 0 || tmin > tmax || params.dim < 2 {
        return Err(Error::InvalidConfig("template db needs >= 2 identities and templates".into()));
    }
    if 2 * params.lookalike_pairs > params.identities {
        return Err(Error::InvalidConfig("too many look-alike pairs".into()));
    }
    let [lo, hi] = params.sigma_range;
    if !(0.0 <= lo && lo <= hi) {
        return Err(Error::InvalidConfig("invalid sigma range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latents: Vec<Vec<f64>> = Vec::with_capacity(params.identities);
    for _ in 0..params.lookalike_pairs {
        latents.extend(confusable_latents(&mut rng, params.dim, 2, params.lookalike_similarity));
    }
    while latents.len() < params.identities {
        latents.push(random_unit(&mut rng, params.dim));
    }
    latents
        .iter()
        .enumerate()
        .map(|(i, latent)| {
            let sigma = lo + (hi - lo) * rng.random::<f64>();
            // slow drift in quality along the tracklet
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let len = rng.random_range(tmin..=tmax);
            let templates = (0..len)
                .map(|j| {
                    let wobble = 1.0 + 0.3 * (phase + j as f64 * 0.3).sin();
                    Embedding::new(noisy_observation(&mut rng, latent, sigma * wobble)).map(|e| e.cast())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TemplateTracklet {
                id: i as u64 + 1,
                identity: Some(GtId(i as u64 + 1)),
                enrollables: templates.clone(),
                verifiables: templates,
            })
        })
        .collect()
}
