//! Scripted benchmark scenes and the ablation runner.
//!
//! The suite mimics the kinds of footage used for evaluation: people leaving
//! and re-entering a corridor view, pedestrians passing behind pillars and
//! trees, dense crowds, low-angle and low-quality views, plus one control
//! scene without re-appearances or long occlusions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Config, FbtrMode};
use crate::error::{Error, Result};
use crate::io::{sig9, sig9_vec};
use crate::metrics::{evaluate, EvalReport};
use crate::pipeline::{group_frames, run, RunOutput};
use crate::scalar::Real;
use crate::sim::{
    generate, ConfusableGroup, GhostTracklet, IdentityScript, NoiseParams, Occluder, Presence, QualityProfile,
    SceneScript,
};
use crate::types::Detection;

/// One configuration of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationSetting {
    pub name: &'static str,
    pub tm: bool,
    pub fbtr: FbtrMode,
    pub cm: bool,
}

const fn setting(name: &'static str, tm: bool, fbtr: FbtrMode, cm: bool) -> AblationSetting {
    AblationSetting { name, tm, fbtr, cm }
}

pub const ABLATION_SETTINGS: [AblationSetting; 8] = [
    setting("DA", false, FbtrMode::Off, false),
    setting("DA+TM", true, FbtrMode::Off, false),
    setting("DA+S_FBTR", false, FbtrMode::Simplified, false),
    setting("DA+TM+S_FBTR", true, FbtrMode::Simplified, false),
    setting("DA+TM+S_FBTR+CM", true, FbtrMode::Simplified, true),
    setting("DA+FBTR", false, FbtrMode::RankBased, false),
    setting("DA+TM+FBTR", true, FbtrMode::RankBased, false),
    setting("DA+TM+FBTR+CM", true, FbtrMode::RankBased, true),
];

impl AblationSetting {
    pub fn by_name(name: &str) -> Option<Self> {
        ABLATION_SETTINGS.iter().copied().find(|s| s.name == name)
    }

    pub fn apply<T: Real>(&self, base: &Config<T>) -> Config<T> {
        Config {
            tm_enabled: self.tm,
            fbtr_mode: self.fbtr,
            cm_enabled: self.cm,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    #[serde(serialize_with = "sig9")]
    pub frag: f64,
    #[serde(serialize_with = "sig9")]
    pub idsw: f64,
    #[serde(serialize_with = "sig9")]
    pub crs: f64,
    pub fusions: u64,
    pub wrong_fusions: u64,
    #[serde(serialize_with = "sig9_vec")]
    pub crp: Vec<f64>,
    /// Wall-clock throughput. Not deterministic; never written to files.
    #[serde(skip)]
    pub fps: f64,
}

impl AblationRow {
    fn from_run(name: &str, report: &EvalReport, out: &RunOutput, fps: f64) -> Self {
        Self {
            name: name.to_string(),
            frag: report.frag,
            idsw: report.idsw,
            crs: report.crs,
            fusions: out.join_events.len() as u64,
            wrong_fusions: out.wrong_fusions() as u64,
            crp: report.crp.clone(),
            fps,
        }
    }
}

/// Runs one configuration and evaluates it against the stream's labels.
pub fn run_and_evaluate<T: Real>(
    cfg: &Config<T>,
    frames: &[(u64, Vec<Detection<T>>)],
    ghosts: &[GhostTracklet<T>],
) -> Result<(RunOutput, EvalReport, f64)> {
    let start = Instant::now();
    let out = run(cfg, frames.iter().cloned().map(Ok), ghosts)?;
    let secs = start.elapsed().as_secs_f64();
    let report = evaluate(&out.eval_input())?;
    let fps = if secs > 0.0 { frames.len() as f64 / secs } else { f64::INFINITY };
    Ok((out, report, fps))
}

/// All eight ablation configurations on one stream.
pub fn run_ablation<T: Real>(
    base: &Config<T>,
    frames: &[(u64, Vec<Detection<T>>)],
    ghosts: &[GhostTracklet<T>],
) -> Result<Vec<AblationRow>> {
    ABLATION_SETTINGS
        .iter()
        .map(|s| {
            let (out, report, fps) = run_and_evaluate(&s.apply(base), frames, ghosts)?;
            Ok(AblationRow::from_run(s.name, &report, &out, fps))
        })
        .collect()
}

/// Pools reports of disjoint streams as if they were one: mismatch counts and
/// detections add up, and each `CR_X` is weighted by identity count.
pub fn pool_reports(reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::Evaluation("nothing to pool".into()));
    }
    let num_dets: u64 = reports.iter().map(|r| r.num_dets).sum();
    let num_ids: u64 = reports.iter().map(|r| r.num_ids).sum();
    let smme: u64 = reports.iter().map(|r| r.smme_count).sum();
    let hmme: u64 = reports.iter().map(|r| r.hmme_count).sum();
    let crp: Vec<f64> = (0..100)
        .map(|i| reports.iter().map(|r| r.crp[i] * r.num_ids as f64).sum::<f64>() / num_ids as f64)
        .collect();
    Ok(EvalReport {
        smme_count: smme,
        hmme_count: hmme,
        frag: smme as f64 / num_dets as f64,
        idsw: hmme as f64 / num_dets as f64,
        crs: crp.iter().sum::<f64>() / 100.0,
        crp,
        num_dets,
        num_ids,
    })
}

/// Text table in the column order Frags, ID-Switches, CRS, FPS.
pub fn format_table(rows: &[AblationRow], with_fps: bool) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(7).max(7);
    let mut s = format!("{:<width$}  {:>9}  {:>11}  {:>6}", "Tracker", "Frags", "ID-Switches", "CRS");
    if with_fps {
        s.push_str(&format!("  {:>8}", "FPS"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:<width$}  {:>9.5}  {:>11.5}  {:>6.3}", r.name, r.frag, r.idsw, r.crs));
        if with_fps {
            s.push_str(&format!("  {:>8.1}", r.fps));
        }
        s.push('\n');
    }
    s
}

/// A benchmark scene and whether it contains re-appearances or occlusions
/// longer than the coasting limit.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub script: SceneScript,
    pub long_term: bool,
}

impl BenchScene {
    pub fn frames<T: Real>(&self) -> Result<Vec<(u64, Vec<Detection<T>>)>> {
        Ok(group_frames(generate::<T>(&self.script)?.detections))
    }
}

const HD: [f64; 2] = [1280.0, 720.0];

fn script(name: &str, seed: u64, frame_count: u64, frame_rect: [f64; 2]) -> SceneScript {
    SceneScript {
        name: name.to_string(),
        seed,
        frame_count,
        frame_rect,
        embedding_dim: 128,
        identities: Vec::new(),
        occluders: Vec::new(),
        noise: NoiseParams::default(),
        confusable_groups: Vec::new(),
    }
}

fn identity(gt_id: u64, presences: Vec<Presence>, quality: QualityProfile) -> IdentityScript {
    IdentityScript {
        gt_id,
        presences,
        face_size: 48.0,
        quality,
    }
}

fn presence(start: u64, end: u64, waypoints: Vec<[f64; 2]>) -> Presence {
    Presence { start, end, waypoints }
}

fn occluder(x: f64, y: f64, w: f64, h: f64, from: u64, to: u64) -> Occluder {
    Occluder {
        rect: [x, y, w, h],
        from,
        to,
    }
}

fn jitter_profile(rng: &mut ChaCha8Rng, base: QualityProfile) -> QualityProfile {
    QualityProfile {
        confidence: (base.confidence + rng.random_range(-0.01..0.01)).clamp(0.0, 1.0),
        sharpness: (base.sharpness + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0),
        ..base
    }
}

/// People walk toward the camera through a doorway, leave at the bottom and
/// come back twice.
fn corridor(name: &str, seed: u64, ids: u64, lateral: f64) -> SceneScript {
    let mut s = script(name, seed, 1500, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..ids {
        let mut ps = Vec::new();
        for k in 0..3u64 {
            let start = i * 22 + k * 440 + rng.random_range(0..50);
            let len = rng.random_range(110..170);
            let x0: f64 = rng.random_range(380.0..900.0);
            let x1 = (x0 + rng.random_range(-lateral..lateral)).clamp(60.0, 1220.0);
            ps.push(presence(start, start + len, vec![[x0, 2.0], [x1, 718.0]]));
        }
        s.identities.push(identity(i + 1, ps, jitter_profile(&mut rng, QualityProfile::default())));
    }
    s
}

/// Pedestrians cross the view horizontally behind wide occluders.
fn occluded_walk(name: &str, seed: u64, ids: u64, frames: u64, pillars: &[(f64, f64)], speed: (f64, f64)) -> SceneScript {
    let mut s = script(name, seed, frames, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(x, w) in pillars {
        s.occluders.push(occluder(x, 0.0, w, 720.0, 0, frames - 1));
    }
    for i in 0..ids {
        let v = rng.random_range(speed.0..speed.1);
        let y = rng.random_range(200.0..640.0);
        let len = (1270.0 / v) as u64;
        let latest = frames.saturating_sub(len + 2).max(1);
        let start = rng.random_range(0..latest);
        let end = (start + len).min(frames - 1);
        let (a, b) = if i % 2 == 0 { (2.0, 1278.0) } else { (1278.0, 2.0) };
        let dy = rng.random_range(-40.0..40.0);
        s.identities.push(identity(
            i + 1,
            vec![presence(start, end, vec![[a, y], [b, y + dy]])],
            jitter_profile(&mut rng, QualityProfile::default()),
        ));
    }
    s
}

/// Dense flow toward the camera with signposts and bidirectional walkers.
fn crowd(name: &str, seed: u64, ids: u64, frames: u64, occluders: &[[f64; 4]]) -> SceneScript {
    let mut s = script(name, seed, frames, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for o in occluders {
        s.occluders.push(occluder(o[0], o[1], o[2], o[3], 0, frames - 1));
    }
    for i in 0..ids {
        let len = rng.random_range(180..320);
        let start = rng.random_range(0..frames - len - 1);
        let x0: f64 = rng.random_range(100.0..1180.0);
        let x1 = (x0 + rng.random_range(-300.0..300.0)).clamp(40.0, 1240.0);
        let (y0, y1) = if i % 3 == 2 { (716.0, 4.0) } else { (4.0, 716.0) };
        let mut q = QualityProfile::default();
        if y0 > y1 {
            // walking away: mostly back of the head
            q.yaw_bias = 40.0;
        }
        s.identities.push(identity(i + 1, vec![presence(start, start + len, vec![[x0, y0], [x1, y1]])], jitter_profile(&mut rng, q)));
    }
    s
}

/// Random multi-waypoint paths with a second visit.
fn plaza(name: &str, seed: u64, ids: u64) -> SceneScript {
    let frames = 1200;
    let mut s = script(name, seed, frames, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.occluders.push(occluder(540.0, 260.0, 200.0, 200.0, 0, frames - 1));
    for i in 0..ids {
        let mut ps = Vec::new();
        for k in 0..2u64 {
            let len = rng.random_range(160..260);
            let start = k * 600 + rng.random_range(0..600 - len - 60);
            let pts: Vec<[f64; 2]> = (0..4)
                .map(|_| [rng.random_range(60.0..1220.0), rng.random_range(60.0..680.0)])
                .collect();
            ps.push(presence(start, start + len, pts));
        }
        s.identities.push(identity(i + 1, ps, jitter_profile(&mut rng, QualityProfile::default())));
    }
    s
}

/// Slow queue passing behind a board; everyone comes back once.
fn queue(seed: u64) -> SceneScript {
    let frames = 1400;
    let mut s = script("queue", seed, frames, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.occluders.push(occluder(560.0, 200.0, 140.0, 400.0, 0, frames - 1));
    for i in 0..12u64 {
        let y = 300.0 + 25.0 * (i % 4) as f64;
        let first = i * 40;
        let p1 = presence(first, first + 500, vec![[250.0, y], [1000.0, y + 10.0]]);
        let back = first + 560 + rng.random_range(0..100);
        let p2 = presence(back, (back + 180).min(frames - 1), vec![[1000.0, y + 120.0], [400.0, y + 140.0]]);
        s.identities.push(identity(i + 1, vec![p1, p2], jitter_profile(&mut rng, QualityProfile::default())));
    }
    s
}

/// Well separated lanes, no re-appearances and no occluders.
fn control(seed: u64) -> SceneScript {
    let mut s = script("control", seed, 600, HD);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..8u64 {
        let x = 100.0 + 150.0 * i as f64;
        let start = i * 30;
        s.identities.push(identity(
            i + 1,
            vec![presence(start, start + 300, vec![[x, 60.0], [x + 20.0, 660.0]])],
            jitter_profile(&mut rng, QualityProfile::default()),
        ));
    }
    s
}

/// The benchmark suite: ten long-term scenes and one control scene.
pub fn benchmark_suite() -> Vec<BenchScene> {
    let long = |script| BenchScene { script, long_term: true };

    let choke1 = corridor("corridor_front", 101, 16, 120.0);
    let choke2 = corridor("corridor_diagonal", 102, 14, 500.0);

    let pillar = occluded_walk("pillar", 103, 16, 1200, &[(560.0, 170.0)], (1.2, 2.2));

    let mut sidewalk = occluded_walk("sidewalk", 104, 28, 1400, &[(260.0, 110.0), (820.0, 130.0)], (1.0, 2.4));
    sidewalk.noise.p_miss = 0.04;

    let bengal = crowd("bengal", 105, 40, 1200, &[[300.0, 250.0, 90.0, 300.0], [880.0, 200.0, 110.0, 350.0]]);

    let mut street = occluded_walk("street", 106, 18, 1200, &[(620.0, 220.0)], (1.4, 2.6));
    for ident in &mut street.identities {
        ident.quality.pose_jitter = 10.0;
        ident.quality.yaw_bias = if ident.gt_id % 2 == 0 { 12.0 } else { -12.0 };
    }
    street.noise.sigma_e = 0.65;

    let mut terminal = plaza("terminal", 107, 20);
    terminal.noise = NoiseParams {
        sigma_e: 0.7,
        sigma_b: 2.0,
        p_miss: 0.08,
    };
    terminal.occluders.push(occluder(150.0, 100.0, 120.0, 500.0, 0, 1199));

    let plaza_scene = plaza("plaza", 108, 18);

    let queue_scene = queue(109);

    let mut shibuya = crowd("shibuya", 110, 36, 1200, &[[1700.0, 600.0, 300.0, 900.0]]);
    shibuya.frame_rect = [3840.0, 2160.0];
    for ident in &mut shibuya.identities {
        for p in &mut ident.presences {
            for w in &mut p.waypoints {
                w[0] *= 3.0;
                w[1] *= 3.0;
            }
        }
        ident.face_size = 90.0;
    }
    shibuya.noise.p_miss = 0.05;

    vec![
        long(choke1),
        long(choke2),
        long(pillar),
        long(sidewalk),
        long(bengal),
        long(street),
        long(terminal),
        long(plaza_scene),
        long(queue_scene),
        long(shibuya),
        BenchScene {
            script: control(111),
            long_term: false,
        },
    ]
}

/// Scenes built around families of look-alike identities that leave and
/// come back, so that a returning face often meets a gallery holding several
/// similar strangers.
pub fn confusable_suite() -> Vec<BenchScene> {
    let mut out = Vec::new();
    for (k, seed) in [201u64, 202, 203].into_iter().enumerate() {
        let mut s = corridor(&format!("lookalikes_{}", k + 1), seed, 20, 200.0);
        s.noise.sigma_e = 0.5;
        s.confusable_groups.push(ConfusableGroup {
            members: (1..=20).collect(),
            similarity: 0.8,
        });
        out.push(BenchScene {
            script: s,
            long_term: true,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_scripts_are_valid() {
        let suite = benchmark_suite();
        assert!(suite.len() >= 10);
        for b in suite.iter().chain(&confusable_suite()) {
            b.script.validate().unwrap_or_else(|e| panic!("{}: {e}", b.script.name));
            assert!(b.script.frame_count <= 1500, "at most 60 s at 25 fps");
        }
    }

    #[test]
    fn setting_names_are_unique() {
        for (i, a) in ABLATION_SETTINGS.iter().enumerate() {
            for b in &ABLATION_SETTINGS[i + 1..] {
                assert_ne!(a.name, b.name);
            }
            assert_eq!(AblationSetting::by_name(a.name), Some(*a));
        }
    }

    #[test]
    fn pooling_one_report_is_identity() {
        let r = EvalReport {
            smme_count: 2,
            hmme_count: 1,
            frag: 0.02,
            idsw: 0.01,
            crs: 0.5,
            crp: vec![0.5; 100],
            num_dets: 100,
            num_ids: 4,
        };
        let p = pool_reports(std::slice::from_ref(&r)).unwrap();
        assert_eq!(p.crp, r.crp);
        assert!((p.frag - r.frag).abs() < 1e-15 && (p.crs - r.crs).abs() < 1e-15);
    }
}
