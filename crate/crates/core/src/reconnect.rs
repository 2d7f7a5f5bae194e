//! Face-based tracklet reconnection.
//!
//! Each gallery tracklet is represented by the normalized mean of its
//! enrollable templates. A query tracklet, represented by the normalized mean
//! of its verifiable templates, is fused into its most similar gallery
//! candidate when that similarity clears a fixed threshold and (in rank-based
//! mode) also exceeds the mean of the next `C` candidates by a factor `1/ε`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Config, FbtrMode};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{dot, l2_norm, Embedding, TrackId};
use crate::tracklet::Tracklet;

/// `(1 + cos) / 2`, clamped to `[0, 1]`. Inputs must be unit norm.
pub fn similarity<T: Real>(a: &Embedding<T>, b: &Embedding<T>) -> T {
    let half = T::lit(0.5);
    (half * (T::one() + a.dot(b))).max(T::zero()).min(T::one())
}

/// Component-wise mean of unit embeddings, renormalized.
pub fn reference_template<T: Real>(embeddings: &[Embedding<T>]) -> Result<Embedding<T>> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::Insufficient("reference template of an empty list".into()))?;
    let mut sum = first.values().to_vec();
    for e in &embeddings[1..] {
        if e.dim() != sum.len() {
            return Err(Error::InvalidEmbedding(format!(
                "dimension mismatch: {} vs {}",
                e.dim(),
                sum.len()
            )));
        }
        for (s, &v) in sum.iter_mut().zip(e.values()) {
            *s = *s + v;
        }
    }
    let n = T::lit(embeddings.len() as f64);
    normalize_sum(sum.into_iter().map(|s| s / n).collect())
}

/// Normalizes an accumulated sum; sums of unit vectors that cancel out are degenerate.
pub(crate) fn normalize_sum<T: Real>(sum: Vec<T>) -> Result<Embedding<T>> {
    let norm = l2_norm(&sum);
    let tiny = T::epsilon() * T::lit(64.0);
    if !(norm > tiny) {
        return Err(Error::DegenerateTemplate);
    }
    Embedding::new(sum)
}

#[derive(Debug, Clone)]
struct GalleryEntry<T> {
    sum: Vec<T>,
    count: usize,
    reference: Option<Embedding<T>>,
    dirty: bool,
}

/// Reference templates of every tracklet that owns at least one enrollable template.
///
/// References are cached and recomputed lazily after insertions.
#[derive(Debug, Clone, Default)]
pub struct Gallery<T> {
    entries: BTreeMap<TrackId, GalleryEntry<T>>,
}

impl<T: Real> Gallery<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: TrackId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = TrackId> + '_ {
        self.entries.keys().copied()
    }

    pub fn insert_enrollable(&mut self, id: TrackId, e: &Embedding<T>) {
        let entry = self.entries.entry(id).or_insert_with(|| GalleryEntry {
            sum: vec![T::zero(); e.dim()],
            count: 0,
            reference: None,
            dirty: true,
        });
        for (s, &v) in entry.sum.iter_mut().zip(e.values()) {
            *s = *s + v;
        }
        entry.count += 1;
        entry.dirty = true;
    }

    /// Registers (or replaces) a tracklet's full enrollable store.
    pub fn insert_tracklet(&mut self, t: &Tracklet<T>) {
        if t.enrollables.is_empty() {
            self.entries.remove(&t.id);
            return;
        }
        self.entries.insert(
            t.id,
            GalleryEntry {
                sum: t.enrollable_sum().to_vec(),
                count: t.enrollables.len(),
                reference: None,
                dirty: true,
            },
        );
    }

    /// Folds `absorbed`'s enrollables into `surviving`.
    pub fn merge(&mut self, absorbed: TrackId, surviving: TrackId) {
        let Some(src) = self.entries.remove(&absorbed) else {
            return;
        };
        match self.entries.get_mut(&surviving) {
            Some(dst) => {
                for (s, &v) in dst.sum.iter_mut().zip(&src.sum) {
                    *s = *s + v;
                }
                dst.count += src.count;
                dst.dirty = true;
            }
            None => {
                self.entries.insert(
                    surviving,
                    GalleryEntry {
                        dirty: true,
                        ..src
                    },
                );
            }
        }
    }

    /// Recomputes every stale reference.
    pub fn refresh(&mut self) {
        for entry in self.entries.values_mut().filter(|e| e.dirty) {
            entry.reference = normalize_sum(entry.sum.clone()).ok();
            entry.dirty = false;
        }
    }

    /// Reference template of `id`, computed on the fly when stale.
    pub fn reference(&self, id: TrackId) -> Option<Embedding<T>> {
        let entry = self.entries.get(&id)?;
        if entry.dirty {
            normalize_sum(entry.sum.clone()).ok()
        } else {
            entry.reference.clone()
        }
    }

    pub fn enrollable_count(&self, id: TrackId) -> usize {
        self.entries.get(&id).map_or(0, |e| e.count)
    }

    fn similarity_to(&self, query: &Embedding<T>, entry: &GalleryEntry<T>) -> Option<T> {
        if entry.dirty {
            let r = normalize_sum(entry.sum.clone()).ok()?;
            Some(similarity(query, &r))
        } else {
            entry.reference.as_ref().map(|r| similarity(query, r))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub id: TrackId,
    pub similarity: T,
}

/// Descending similarity, ties to the older (smaller) id.
fn candidate_order<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> Ordering {
    b.similarity
        .partial_cmp(&a.similarity)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

/// Gallery tracklets other than `exclude`, most similar first. Position `R - 1`
/// holds the rank-`R` candidate.
pub fn rank_candidates<T: Real>(
    query: &Embedding<T>,
    gallery: &Gallery<T>,
    exclude: TrackId,
) -> Vec<Candidate<T>> {
    rank_candidates_where(query, gallery, |id| id != exclude)
}

/// Like [`rank_candidates`] with an arbitrary admission filter.
pub fn rank_candidates_where<T: Real>(
    query: &Embedding<T>,
    gallery: &Gallery<T>,
    admit: impl Fn(TrackId) -> bool,
) -> Vec<Candidate<T>> {
    let mut out: Vec<Candidate<T>> = gallery
        .entries
        .iter()
        .filter(|(id, _)| admit(**id))
        .filter_map(|(&id, entry)| {
            gallery
                .similarity_to(query, entry)
                .map(|similarity| Candidate { id, similarity })
        })
        .collect();
    out.sort_by(candidate_order);
    out
}

/// Rank-margin test on a descending similarity list.
///
/// Holds when `sims[0] >= (1/epsilon) * mean(sims[1..=C'])` with
/// `C' = min(c, sims.len() - 1)`. A lone candidate passes.
pub fn check_rank_margin<T: Real>(sims: &[T], epsilon: T, c: usize) -> bool {
    let Some(&best) = sims.first() else {
        return false;
    };
    let competitors = c.min(sims.len() - 1);
    if competitors == 0 {
        return true;
    }
    let mean = sims[1..=competitors].iter().copied().sum::<T>() / T::lit(competitors as f64);
    best >= mean / epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum Outcome {
    Fused(TrackId),
    RejectedThreshold,
    RejectedRankMargin,
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconnectionDecision<T> {
    pub query: TrackId,
    pub candidates: Vec<Candidate<T>>,
    pub outcome: Outcome,
}

/// A fusion: `absorbed` (the querying tracklet) was merged into `surviving`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinPair {
    pub absorbed: TrackId,
    pub surviving: TrackId,
    pub frame: u64,
}

/// Mean of a tracklet's verifiable templates, if it has any.
pub fn verifiable_mean<T: Real>(t: &Tracklet<T>) -> Option<Embedding<T>> {
    if t.verifiables.is_empty() {
        return None;
    }
    normalize_sum(t.verifiable_sum().to_vec()).ok()
}

/// Decides whether `t_k` should be fused into its best gallery candidate.
///
/// `admit` filters the candidate pool (the query itself is always excluded).
pub fn try_reconnect<T: Real>(
    t_k: &Tracklet<T>,
    gallery: &Gallery<T>,
    cfg: &Config<T>,
    admit: impl Fn(TrackId) -> bool,
) -> ReconnectionDecision<T> {
    let no = |candidates| ReconnectionDecision {
        query: t_k.id,
        candidates,
        outcome: Outcome::NoCandidates,
    };
    if cfg.fbtr_mode == FbtrMode::Off {
        return no(Vec::new());
    }
    let Some(query) = verifiable_mean(t_k) else {
        return no(Vec::new());
    };
    let candidates = rank_candidates_where(&query, gallery, |id| id != t_k.id && admit(id));
    let Some(best) = candidates.first().copied() else {
        return no(candidates);
    };
    let outcome = match cfg.fbtr_mode {
        FbtrMode::Simplified => {
            if best.similarity >= cfg.lambda_s_fbtr {
                Outcome::Fused(best.id)
            } else {
                Outcome::RejectedThreshold
            }
        }
        _ => {
            let sims: Vec<T> = candidates.iter().map(|c| c.similarity).collect();
            if best.similarity < cfg.lambda_fbtr {
                Outcome::RejectedThreshold
            } else if !check_rank_margin(&sims, cfg.epsilon, cfg.rank_c) {
                Outcome::RejectedRankMargin
            } else {
                Outcome::Fused(best.id)
            }
        }
    };
    ReconnectionDecision {
        query: t_k.id,
        candidates,
        outcome,
    }
}

/// Raw cosine, exposed for diagnostics.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    dot(a, b) / (l2_norm(a) * l2_norm(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PredictorKind;
    use crate::quality::QualityClass;
    use crate::types::{BBox, DetId, Detection, QualityAttrs};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn unit(i: usize, d: usize) -> Embedding<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Embedding::new(v).unwrap()
    }

    fn emb(v: &[f64]) -> Embedding<f64> {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn random_unit(rng: &mut impl Rng, d: usize) -> Embedding<f64> {
        Embedding::new((0..d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn tracklet(id: u64, enroll: &[Embedding<f64>], verify: &[Embedding<f64>]) -> Tracklet<f64> {
        let d = Detection {
            det_id: DetId(id * 1000),
            frame: 0,
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            embedding: unit(0, enroll.first().or(verify.first()).map_or(2, |e| e.dim())),
            quality: QualityAttrs::new(0.99, 0.0, 0.0, 0.0, 0.99).unwrap(),
            gt_id: None,
        };
        let mut t = Tracklet::new(TrackId(id), &d, PredictorKind::Static);
        for e in enroll {
            t.add_template(QualityClass::Enrollable, e);
        }
        for v in verify {
            t.add_template(QualityClass::Verifiable, v);
        }
        t
    }

    #[test]
    fn similarity_examples() {
        let a = emb(&[0.3, -0.4, 0.5]);
        assert!((similarity(&a, &a) - 1.0).abs() < 1e-12);
        let neg = emb(&[-0.3, 0.4, -0.5]);
        assert!(similarity(&a, &neg).abs() < 1e-12);
        assert!((similarity(&unit(0, 3), &unit(1, 3)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reference_template_examples() {
        let a = emb(&[0.6, 0.8]);
        assert_eq!(reference_template(&[a.clone()]).unwrap(), a);
        let r = reference_template(&[a.clone(), a.clone()]).unwrap();
        assert!(r.values().iter().zip(a.values()).all(|(x, y)| (x - y).abs() < 1e-15));
        let r = reference_template(&[unit(0, 2), unit(1, 2)]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((r.values()[0] - s).abs() < 1e-15 && (r.values()[1] - s).abs() < 1e-15);
        assert!(matches!(
            reference_template(&[a.clone(), emb(&[-0.6, -0.8])]),
            Err(Error::DegenerateTemplate)
        ));
        assert!(reference_template::<f64>(&[]).is_err());
    }

    #[test]
    fn rank_margin_examples() {
        // mean 0.45, bound 0.5625
        assert!(check_rank_margin(&[0.9, 0.5, 0.4], 0.8, 2));
        // bound 0.7375
        assert!(!check_rank_margin(&[0.6, 0.59], 0.8, 1));
        assert!(check_rank_margin(&[0.1], 0.8, 6));
        assert!(!check_rank_margin::<f64>(&[], 0.8, 6));
    }

    #[test]
    fn rank_single_and_exact_match() {
        let mut g = Gallery::new();
        let me = tracklet(1, &[unit(0, 4)], &[]);
        let other = tracklet(2, &[unit(1, 4)], &[]);
        g.insert_tracklet(&me);
        g.insert_tracklet(&other);
        let ranked = rank_candidates(&unit(1, 4), &g, TrackId(1));
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].id, TrackId(2));

        let third = tracklet(3, &[unit(2, 4)], &[]);
        g.insert_tracklet(&third);
        g.refresh();
        let ranked = rank_candidates(&unit(2, 4), &g, TrackId(99));
        assert_eq!(ranked[0].id, TrackId(3));
        assert!((ranked[0].similarity - 1.0).abs() < 1e-15);
        assert!((ranked[1].similarity - 0.5).abs() < 1e-15);
        // tie between 1 and 2 goes to the older id
        assert_eq!(ranked[1].id, TrackId(1));
    }

    #[test]
    fn ranking_matches_full_sort_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let mut g = Gallery::new();
        let refs: Vec<Embedding<f64>> = (0..10).map(|_| random_unit(&mut rng, 16)).collect();
        for (i, r) in refs.iter().enumerate() {
            g.insert_enrollable(TrackId(i as u64 + 1), r);
        }
        let q = random_unit(&mut rng, 16);
        let ranked = rank_candidates(&q, &g, TrackId(5));
        let mut oracle: Vec<(f64, u64)> = refs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 4)
            .map(|(i, r)| ((1.0 + q.values().iter().zip(r.values()).map(|(a, b)| a * b).sum::<f64>()) / 2.0, i as u64 + 1))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(ranked.len(), 9);
        for (c, (s, id)) in ranked.iter().zip(&oracle) {
            assert_eq!(c.id, TrackId(*id));
            assert!((c.similarity - s).abs() < 1e-12);
        }
    }

    #[test]
    fn gallery_cache_matches_reference_template() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut g = Gallery::new();
        let es: Vec<Embedding<f64>> = (0..7).map(|_| random_unit(&mut rng, 8)).collect();
        for e in &es {
            g.insert_enrollable(TrackId(1), e);
        }
        g.refresh();
        let cached = g.reference(TrackId(1)).unwrap();
        let direct = reference_template(&es).unwrap();
        for (a, b) in cached.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fuses_on_clear_match() {
        let d = 8;
        let mut g = Gallery::new();
        for i in 0..8 {
            g.insert_tracklet(&tracklet(i as u64 + 1, &[unit(i, d)], &[]));
        }
        // query equals candidate 3's reference, all others orthogonal (0.5)
        let q = tracklet(20, &[], &[unit(2, d)]);
        let cfg = Config::default();
        let dec = try_reconnect(&q, &g, &cfg, |_| true);
        // 1.0 >= 0.5 and 1.0 >= 1.25 * 0.5
        assert_eq!(dec.outcome, Outcome::Fused(TrackId(3)));
        assert_eq!(dec.candidates.len(), 8);
    }

    #[test]
    fn rejects_below_threshold() {
        let mut g = Gallery::new();
        // cos = -0.1 → similarity 0.45
        let c = (0.99f64).sqrt();
        g.insert_tracklet(&tracklet(1, &[emb(&[-0.1, c])], &[]));
        let q = tracklet(2, &[], &[emb(&[1.0, 0.0])]);
        let dec = try_reconnect(&q, &g, &Config::default(), |_| true);
        assert!((dec.candidates[0].similarity - 0.45).abs() < 1e-12);
        assert_eq!(dec.outcome, Outcome::RejectedThreshold);
    }

    #[test]
    fn rejects_near_tie() {
        // sims 0.8 and 0.79 → cos 0.6 and 0.58
        let mk = |cos: f64, side: f64| emb(&[cos, side * (1.0 - cos * cos).sqrt(), 0.0]);
        let mut g = Gallery::new();
        g.insert_tracklet(&tracklet(1, &[mk(0.6, 1.0)], &[]));
        let b = mk(0.58, 1.0);
        g.insert_tracklet(&tracklet(2, &[emb(&[b.values()[0], 0.0, b.values()[1]])], &[]));
        let q = tracklet(3, &[], &[unit(0, 3)]);
        let cfg = Config {
            rank_c: 1,
            ..Config::default()
        };
        let dec = try_reconnect(&q, &g, &cfg, |_| true);
        assert!((dec.candidates[0].similarity - 0.8).abs() < 1e-12);
        assert!((dec.candidates[1].similarity - 0.79).abs() < 1e-12);
        assert_eq!(dec.outcome, Outcome::RejectedRankMargin);
        // the simplified rule at the same threshold fuses
        let simple = Config {
            fbtr_mode: FbtrMode::Simplified,
            lambda_s_fbtr: cfg.lambda_fbtr,
            ..cfg
        };
        assert_eq!(try_reconnect(&q, &g, &simple, |_| true).outcome, Outcome::Fused(TrackId(1)));
    }

    #[test]
    fn no_candidates() {
        let g = Gallery::new();
        let q = tracklet(1, &[], &[unit(0, 3)]);
        assert_eq!(try_reconnect(&q, &g, &Config::default(), |_| true).outcome, Outcome::NoCandidates);
        let mut g = Gallery::new();
        g.insert_tracklet(&tracklet(1, &[unit(0, 3)], &[unit(0, 3)]));
        // only the query itself is enrolled
        assert_eq!(try_reconnect(&q, &g, &Config::default(), |_| true).outcome, Outcome::NoCandidates);
    }

    fn sims_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..1.0f64, 1..12).prop_map(|mut v| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        })
    }

    proptest! {
        #[test]
        fn rank_margin_monotone_in_epsilon(sims in sims_strategy(), e0 in 0.05..1.0f64, de in 0.0..1.0f64, c in 1usize..9) {
            let e1 = (e0 + de).min(1.0);
            if check_rank_margin(&sims, e0, c) {
                prop_assert!(check_rank_margin(&sims, e1, c));
            }
        }

        #[test]
        fn rank_based_rejects_superset_of_simplified(seed in any::<u64>(), n in 1usize..8, lambda in 0.3..0.9f64) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut g = Gallery::new();
            for i in 0..n {
                g.insert_tracklet(&tracklet(i as u64 + 1, &[random_unit(&mut rng, 4)], &[]));
            }
            let q = tracklet(100, &[], &[random_unit(&mut rng, 4)]);
            let rank = Config { lambda_fbtr: lambda, ..Config::default() };
            let simple = Config { fbtr_mode: FbtrMode::Simplified, lambda_s_fbtr: lambda, ..rank.clone() };
            let a = try_reconnect(&q, &g, &rank, |_| true);
            let b = try_reconnect(&q, &g, &simple, |_| true);
            if !matches!(b.outcome, Outcome::Fused(_)) {
                prop_assert!(!matches!(a.outcome, Outcome::Fused(_)));
            }
            if let Outcome::Fused(t) = a.outcome {
                prop_assert_eq!(b.outcome, Outcome::Fused(t));
            }
        }

        #[test]
        fn decisions_ignore_embedding_scale(seed in any::<u64>(), scale in 0.01..100.0f64) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let raws: Vec<Vec<f64>> = (0..6).map(|_| (0..5).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let build = |s: f64| {
                let mut g = Gallery::new();
                for (i, r) in raws[1..].iter().enumerate() {
                    let e = Embedding::new(r.iter().map(|v| v * s).collect()).unwrap();
                    g.insert_tracklet(&tracklet(i as u64 + 1, &[e], &[]));
                }
                let q = tracklet(50, &[], &[Embedding::new(raws[0].iter().map(|v| v * s).collect()).unwrap()]);
                (g, q)
            };
            let (g1, q1) = build(1.0);
            let (g2, q2) = build(scale);
            let cfg = Config::default();
            let a = try_reconnect(&q1, &g1, &cfg, |_| true);
            let b = try_reconnect(&q2, &g2, &cfg, |_| true);
            prop_assert_eq!(a.outcome, b.outcome);
            let ids_a: Vec<_> = a.candidates.iter().map(|c| c.id).collect();
            let ids_b: Vec<_> = b.candidates.iter().map(|c| c.id).collect();
            prop_assert_eq!(ids_a, ids_b);
        }
    }
}
